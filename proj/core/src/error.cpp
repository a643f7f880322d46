#include "vulnscout/error.hpp"

namespace vulnscout {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::root_not_found: return "ROOT_NOT_FOUND";
    case Errc::no_sources_found: return "NO_SOURCES_FOUND";
    case Errc::no_entry_points: return "NO_ENTRY_POINTS";
    case Errc::target_unreachable: return "TARGET_UNREACHABLE";
    case Errc::backend_timeout: return "BACKEND_TIMEOUT";
    case Errc::malformed_response: return "MALFORMED_RESPONSE";
    case Errc::forced_conclusion_failed: return "FORCED_CONCLUSION_FAILED";
    case Errc::unbalanced_guards: return "UNBALANCED_GUARDS";
    case Errc::empty_target: return "EMPTY_TARGET";
    case Errc::length_mismatch: return "LENGTH_MISMATCH";
    case Errc::summary_verdict_drift: return "SUMMARY_VERDICT_DRIFT";
    case Errc::no_constitution: return "NO_CONSTITUTION";
    case Errc::usage: return "USAGE";
    case Errc::io: return "IO";
    }
    return "UNKNOWN";
}

} // namespace vulnscout
