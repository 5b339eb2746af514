#include "failure_lens/errors.hpp"

namespace flens {

const char* errc_name(Errc code) {
    switch (code) {
        case Errc::io_failure: return "io failure";
        case Errc::bad_magic: return "bad magic";
        case Errc::version_mismatch: return "version mismatch";
        case Errc::size_mismatch: return "size mismatch";
        case Errc::non_finite: return "non-finite value";
        case Errc::row_count_mismatch: return "row-count mismatch";
        case Errc::duplicate_id: return "duplicate id";
        case Errc::confidence_out_of_range: return "confidence out of range";
        case Errc::alignment: return "alignment failure";
        case Errc::invalid_argument: return "invalid argument";
        case Errc::zero_norm: return "zero norm";
        case Errc::dim_mismatch: return "dimension mismatch";
        case Errc::antipodal: return "antipodal inputs";
        case Errc::single_class: return "single-class input";
        case Errc::not_enough_data: return "NotEnoughData";
        case Errc::degenerate_caption: return "degenerate caption";
        case Errc::missing_reference: return "missing reference caption";
        case Errc::k_out_of_range: return "k out of range";
        case Errc::zero_variance: return "zero variance";
        case Errc::missing_annotation: return "missing group annotation";
    }
    return "unknown error";
}

}  // namespace flens
