#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace vulnscout {

enum class Language { c, cpp, java, python };

std::optional<Language> language_from_string(std::string_view name);
const char* language_name(Language lang);

// Marker used as callee_name for calls made through a pointer expression.
inline constexpr const char* kFunctionPointer = "FUNCTION_POINTER";

struct FunctionRecord {
    std::string name;
    std::string qualified_name;
    std::string file;    // path relative to the project root
    int start_line = 0;  // 1-based, inclusive
    int end_line = 0;    // 1-based, inclusive
    std::string source_text;
    std::vector<std::string> param_sig;
    bool is_address_taken = false;
};

struct CallSiteRecord {
    std::string caller; // qualified_name of the enclosing function
    std::string callee_name;
    int arg_count = 0;
    std::vector<std::string> arg_sig; // best-effort normalized argument types
    std::string file;
    int line = 0;
};

struct SkippedFile {
    std::string file;
    std::string reason;
};

// Immutable after parse_project; safe to share across threads.
struct ProjectIndex {
    std::string root;
    Language language = Language::c;
    std::vector<FunctionRecord> functions;   // sorted by (file, start_line)
    std::vector<CallSiteRecord> call_sites;  // sorted by (file, line, callee)
    std::vector<SkippedFile> skipped;

    const FunctionRecord* by_qualified_name(std::string_view qname) const;
    // All records whose name or qualified_name matches, sorted by (file, start_line).
    std::vector<const FunctionRecord*> by_name(std::string_view name) const;

    void rebuild_lookup();

private:
    std::unordered_map<std::string, std::size_t> qualified_lookup_;
    std::unordered_map<std::string, std::vector<std::size_t>> name_lookup_;
};

// Result of parsing one file; exposed for tests and corpus tooling.
struct FileParse {
    std::vector<FunctionRecord> functions;
    std::vector<CallSiteRecord> call_sites;
};

// Parses a whole source tree. Files that fail to parse are recorded in
// index.skipped; the run never aborts over a single bad file.
// Throws Error(root_not_found) / Error(no_sources_found).
ProjectIndex parse_project(const std::filesystem::path& root, Language lang);

// Parses one file's content. Throws on structurally unbalanced input.
FileParse parse_source(std::string_view content, const std::string& rel_path, Language lang);

std::vector<const FunctionRecord*> get_function_definition(const ProjectIndex& index,
                                                           std::string_view name);

// Normalized parameter-type spelling: drops parameter names, cv-qualifiers
// and storage classes, collapses whitespace, keeps pointer depth and base
// tokens. Total: unparseable input comes back whitespace-collapsed.
std::string normalize_type(std::string_view raw);

nlohmann::ordered_json index_to_json(const ProjectIndex& index);
ProjectIndex index_from_json(const nlohmann::ordered_json& j);
void save_index(const ProjectIndex& index, const std::filesystem::path& path);
ProjectIndex load_index(const std::filesystem::path& path);

} // namespace vulnscout
