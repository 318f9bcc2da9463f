// History mining: Dockerfile-related modification records from git, matching
// of records to current instructions and windowed modification frequencies.
#pragma once

#include "dockorder/dockerfile.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dockorder {

enum class ChangeKind { Addition, Deletion, Modification };

std::string_view to_string(ChangeKind k);
std::optional<ChangeKind> change_kind_from_string(std::string_view s);

struct ModificationRecord {
    std::string commit_id;
    std::string instruction_kind;  // "RUN", "COPY", ... or "FILE" for implicit records
    std::string content;           // instruction text, or a build-context-relative file path
    std::int64_t date = 0;         // unix seconds (committer date)
    ChangeKind change_kind = ChangeKind::Modification;
    std::vector<std::size_t> line_numbers;
    std::optional<std::size_t> related_instruction_hint;

    bool implicit() const { return instruction_kind == "FILE"; }
    bool operator==(const ModificationRecord&) const = default;
};

enum class MatchCategory { KeyValue, FileSystem, ShellScript, Special };

std::string_view to_string(MatchCategory c);
/// MAINTAINER is deprecated and matched by kind equality, like Special.
MatchCategory classify(InstructionKind k);

struct FrequencyTable {
    std::vector<double> raw;         // F(c)
    std::vector<double> normalized;  // F_norm(c)
    std::size_t total_modifications = 0;
    int window_months = 30;

    static FrequencyTable uniform(std::size_t n);
};

// --- time window ---------------------------------------------------------

/// `as_of` moved back by whole calendar months (UTC), day clamped to the month length.
std::int64_t window_start(std::int64_t as_of, int window_months);
std::vector<ModificationRecord> filter_window(const std::vector<ModificationRecord>& records, int window_months,
                                              std::int64_t as_of);
/// Accepts unix seconds or ISO-8601 "YYYY-MM-DD[THH:MM:SS[Z]]" (UTC).
std::int64_t parse_timestamp(std::string_view s);

// --- mining --------------------------------------------------------------

struct HistoryOptions {
    int window_months = 30;
    std::optional<std::int64_t> as_of;  // default: now
    /// Only commits after this one (exclusive) are mined; used for incremental runs.
    std::optional<std::string> since_commit;
};

/// Walks the first-parent line of HEAD. Root commits are skipped. The build
/// context is the Dockerfile's directory. Uses $DOCKORDER_GIT or "git".
std::vector<ModificationRecord> collect_history(const std::string& repo_path, const std::string& dockerfile_path,
                                                const HistoryOptions& opts = {});
std::vector<ModificationRecord> collect_history(const std::string& repo_path, const std::string& dockerfile_path,
                                                int window_months);

/// Current HEAD commit id of a work tree.
std::string head_commit(const std::string& repo_path);
bool is_ancestor(const std::string& repo_path, const std::string& ancestor, const std::string& descendant);

/// Build-context patterns referenced by COPY/ADD (the maintained address list).
std::vector<std::string> address_list(const ParsedDockerfile& doc);

// --- record cache ---------------------------------------------------------

struct RecordCache {
    std::string head;
    std::string dockerfile;
    int window_months = 30;
    std::int64_t mined_from = 0;  // window start used when mining
    std::vector<std::string> addresses;
    std::vector<ModificationRecord> records;
};

std::string records_to_json(const std::vector<ModificationRecord>& records);
std::vector<ModificationRecord> records_from_json(std::string_view json_text);
std::string cache_to_json(const RecordCache& cache);
RecordCache cache_from_json(std::string_view json_text);

/// Reuses `cache_path` when HEAD, Dockerfile, window and address list are
/// unchanged; mines only new commits when the cached HEAD is an ancestor of
/// the current one; otherwise mines from scratch. Rewrites the cache file.
/// `reused` reports whether any cached records were kept.
std::vector<ModificationRecord> collect_history_cached(const std::string& repo_path, const std::string& dockerfile_path,
                                                       const HistoryOptions& opts, const std::string& cache_path,
                                                       bool* reused = nullptr);

// --- similarity and frequencies -------------------------------------------

std::vector<std::string> shell_tokens(std::string_view instruction_text);

class SimilarityModel {
public:
    /// The TF-IDF corpus is the ShellScript instructions of `doc` plus every
    /// ShellScript record in `records`.
    SimilarityModel(const ParsedDockerfile& doc, const std::vector<ModificationRecord>& records, double tau = 0.5);

    double similarity(const Instruction& c, const ModificationRecord& r) const;
    /// Raw cosine between two instruction texts under this corpus (no threshold).
    double cosine(std::string_view a, std::string_view b) const;
    double tau() const { return tau_; }

private:
    std::map<std::string, double> weights(std::string_view text) const;
    double idf(const std::string& token) const;

    std::map<std::string, std::size_t> df_;
    std::size_t corpus_size_ = 0;
    double tau_;
};

/// Per-instruction similarity matrix: result[c][r].
std::vector<std::vector<double>> similarity_matrix(const ParsedDockerfile& doc,
                                                   const std::vector<ModificationRecord>& records, double tau = 0.5);

/// F(c) = sum_r sim(c, r) / total_modifications; F_norm = F / sum F, uniform when sum F = 0.
FrequencyTable compute_frequencies_from_matrix(const std::vector<std::vector<double>>& sims,
                                               std::size_t total_modifications, int window_months = 30);

FrequencyTable compute_frequencies(const ParsedDockerfile& doc, const std::vector<ModificationRecord>& records,
                                   int window_months = 30, double tau = 0.5);

}  // namespace dockorder
