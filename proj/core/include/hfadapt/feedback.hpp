#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hfadapt/dataio.hpp"
#include "hfadapt/models.hpp"

namespace hfadapt {

enum class Label { Good, Bad };

// The one place the label mapping lives: Good -> 0, Bad -> 1.
int reward_target(Label label) noexcept;
Label label_from_target(int y);
const char* label_name(Label label) noexcept;  // "good" / "bad"
// Case-insensitive "good"/"bad"; nullopt otherwise.
std::optional<Label> parse_label(std::string_view text);

enum class FeedbackSource { Human, Oracle };
const char* source_name(FeedbackSource s) noexcept;

struct FeedbackRecord {
  std::uint64_t id = 0;
  Label label = Label::Good;
  FeedbackSource source = FeedbackSource::Oracle;
  std::string ts;  // ISO-8601 UTC
  std::string session;

  int y_r() const noexcept { return reward_target(label); }
};

std::string utc_timestamp();

// One JSON object per line with keys id, label, y_r, source, ts, session.
std::string to_json_line(const FeedbackRecord& r);
// Throws ParseError carrying `line_number` on malformed or inconsistent lines.
FeedbackRecord from_json_line(std::string_view line, std::uint64_t line_number);

/// Append-only JSON-lines store. Each record goes out as a single write() of
/// one complete line, serialized by a mutex, so a reader after a crash sees a
/// prefix of the accepted records. An unterminated final line (a write that
/// never completed) is discarded when the store is opened.
class FeedbackStore {
 public:
  // `durable`: fdatasync after every append.
  explicit FeedbackStore(std::filesystem::path path, bool durable = false);
  ~FeedbackStore();
  FeedbackStore(const FeedbackStore&) = delete;
  FeedbackStore& operator=(const FeedbackStore&) = delete;

  // Throws DuplicateRecordError for a repeated (session, id); the file is
  // left untouched in that case.
  void append(const FeedbackRecord& record);
  bool contains(const std::string& session, std::uint64_t id) const;
  std::vector<FeedbackRecord> records() const;
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  bool durable_;
  int fd_ = -1;
  mutable std::mutex mutex_;
  std::vector<FeedbackRecord> records_;
  std::set<std::pair<std::string, std::uint64_t>> keys_;
};

// Reads every complete line; error messages carry line numbers.
std::vector<FeedbackRecord> load_feedback(const std::filesystem::path& path);

/// Frozen-generator outputs over a target split, plus the manifest that ties
/// them to the exact checkpoint and noise settings that produced them.
struct CandidateSet {
  std::string session;
  std::string generator_sha256;
  NoiseSpec noise;
  std::string dataset;
  std::vector<std::uint64_t> ids;
  Tensor z;          // [N,1,S,S] noisy inputs
  Tensor g;          // [N,1,S,S] frozen generator outputs
  Tensor reference;  // [N,1,S,S] clean images; for the oracle and evaluation only

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t index_of(std::uint64_t id) const;  // throws ValidationError if unknown
  bool has(std::uint64_t id) const;
};

CandidateSet generate_candidates(const ModelParameters& generator, const ArchitectureConfig& arch,
                                 const std::vector<PairedSample>& target,
                                 const std::string& generator_sha256, const NoiseSpec& noise,
                                 const std::string& dataset);

// candidates.ckpt ("z/<id>", "g/<id>", "x/<id>") + candidates.json manifest.
void save_candidates(const CandidateSet& set, const std::filesystem::path& dir);
CandidateSet load_candidates(const std::filesystem::path& dir);

struct OracleSpec {
  double tau_db = 18.0;
  void validate() const;
};

// Good iff PSNR(candidate, reference) >= tau.
Label oracle_label(const Tensor& candidate, const Tensor& reference, const OracleSpec& spec);

struct LabelCounts {
  std::size_t good = 0;
  std::size_t bad = 0;
};

// Labels every candidate not yet in the store for this session.
LabelCounts label_with_oracle(const CandidateSet& set, FeedbackStore& store, const OracleSpec& spec);

// Feedback for `set.session`, as (candidate index, y_r) in store order.
std::vector<std::pair<std::size_t, int>> labeled_indices(const CandidateSet& set,
                                                         const std::vector<FeedbackRecord>& records);

}  // namespace hfadapt
