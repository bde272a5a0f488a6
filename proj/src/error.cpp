#include "tamperlab/error.hpp"

namespace tamperlab {

const char* to_string(Errc code)
{
    switch (code) {
    case Errc::io_error: return "io-error";
    case Errc::decode_error: return "decode-error";
    case Errc::unsupported_channel_count: return "unsupported-channel-count";
    case Errc::shape_mismatch: return "shape-mismatch";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::empty_mask: return "empty-mask";
    case Errc::too_few_keypoints: return "too-few-keypoints";
    case Errc::no_consensus: return "no-consensus";
    case Errc::degenerate_ground_truth: return "degenerate-ground-truth";
    case Errc::index_out_of_range: return "index-out-of-range";
    case Errc::missing_replacement_class: return "missing-replacement-class";
    case Errc::bad_arity: return "bad-arity";
    case Errc::schema_violation: return "schema-violation";
    case Errc::manifest_parse_error: return "manifest-parse-error";
    case Errc::config_error: return "config-error";
    case Errc::not_found: return "not-found";
    }
    return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
{
}

} // namespace tamperlab
