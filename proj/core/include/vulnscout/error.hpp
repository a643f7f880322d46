#pragma once

#include <stdexcept>
#include <string>

namespace vulnscout {

enum class Errc {
    root_not_found,
    no_sources_found,
    no_entry_points,
    target_unreachable,
    backend_timeout,
    malformed_response,
    forced_conclusion_failed,
    unbalanced_guards,
    empty_target,
    length_mismatch,
    summary_verdict_drift,
    no_constitution,
    usage,
    io,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

} // namespace vulnscout
