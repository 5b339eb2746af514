#pragma once

#include <stdexcept>
#include <string>

namespace flens {

// Every failure surfaced by the toolkit carries one of these codes so the
// CLI (and bindings) can map it to an exit status without string matching.
enum class Errc {
    io_failure,
    bad_magic,
    version_mismatch,
    size_mismatch,
    non_finite,
    row_count_mismatch,
    duplicate_id,
    confidence_out_of_range,
    alignment,
    invalid_argument,
    zero_norm,
    dim_mismatch,
    antipodal,
    single_class,
    not_enough_data,
    degenerate_caption,
    missing_reference,
    k_out_of_range,
    zero_variance,
    missing_annotation,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace flens
