#pragma once

#include <stdexcept>
#include <string>

namespace tamperlab {

enum class Errc {
    io_error,
    decode_error,
    unsupported_channel_count,
    shape_mismatch,
    invalid_argument,
    empty_mask,
    too_few_keypoints,
    no_consensus,
    degenerate_ground_truth,
    index_out_of_range,
    missing_replacement_class,
    bad_arity,
    schema_violation,
    manifest_parse_error,
    config_error,
    not_found,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace tamperlab
