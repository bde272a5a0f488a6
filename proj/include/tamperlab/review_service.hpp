#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tamperlab/codec.hpp"
#include "tamperlab/curation.hpp"

namespace tamperlab {

struct ScoreSubmission {
    std::string id;
    int score = 0;
    std::string reviewer;
    std::string timestamp;
};

struct ReviewStats {
    std::size_t total = 0;
    std::size_t pending = 0;
    std::size_t scored = 0;
    std::size_t retained = 0;
    std::map<std::string, std::optional<double>> pass_rate_by_type; ///< null while unscored

    nlohmann::ordered_json to_json() const;
};

/// records.jsonl plus an append-only score log next to it
/// (records.jsonl.scores.log). Every acknowledged score is fsync'd to the
/// log before submit() returns. Opening the store replays the log into the
/// records, rewrites records.jsonl and truncates the log.
class ReviewStore {
public:
    explicit ReviewStore(std::filesystem::path records_path, FilterThresholds thresholds = {});

    /// pending_review records in id order, at most `limit`.
    std::vector<SampleRecord> queue(std::size_t limit) const;
    std::optional<SampleRecord> find(const std::string& id) const;
    /// Throws not_found for an unknown id, invalid_argument for a score
    /// outside 1..5. A later submission for the same id overwrites.
    SampleRecord submit(const ScoreSubmission& s);
    ReviewStats stats() const;
    /// Folds the log into records.jsonl.
    void compact();

    std::filesystem::path resolve(const std::string& entry) const;
    const std::filesystem::path& records_path() const { return records_path_; }
    std::filesystem::path log_path() const;

private:
    using Snapshot = std::map<std::string, std::shared_ptr<const SampleRecord>>;

    std::shared_ptr<const Snapshot> snapshot() const;
    void append_log(const ScoreSubmission& s);
    SampleRecord apply(const SampleRecord& r, const ScoreSubmission& s) const;

    std::filesystem::path records_path_;
    FilterThresholds thresholds_;
    std::shared_ptr<const Snapshot> snapshot_;
    mutable std::mutex snapshot_mutex_; ///< guards the pointer swap only
    std::mutex write_mutex_;            ///< serializes submissions and compaction
};

/// 50% blend of a fixed highlight color over `tampered` wherever `label` is set.
Image render_overlay(const Image& tampered, const BinaryLabel& label);

nlohmann::ordered_json review_item_json(const SampleRecord& r);

class ReviewServer {
public:
    explicit ReviewServer(ReviewStore& store, std::string cors_origin = "*");
    ~ReviewServer();

    /// Binds to host:port; port 0 picks a free port. Returns the bound port
    /// or -1 on failure.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    bool listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace tamperlab
