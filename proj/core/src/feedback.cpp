#include "hfadapt/feedback.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <unordered_map>

#include "hfadapt/checkpoint.hpp"
#include "hfadapt/error.hpp"
#include "hfadapt/hash.hpp"
#include "hfadapt/metrics.hpp"

namespace hfadapt {

using nlohmann::json;

int reward_target(Label label) noexcept { return label == Label::Good ? 0 : 1; }

Label label_from_target(int y) {
  if (y == 0) return Label::Good;
  if (y == 1) return Label::Bad;
  throw ContractViolation("reward target must be 0 or 1, got " + std::to_string(y));
}

const char* label_name(Label label) noexcept { return label == Label::Good ? "good" : "bad"; }

std::optional<Label> parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "good") return Label::Good;
  if (lower == "bad") return Label::Bad;
  return std::nullopt;
}

const char* source_name(FeedbackSource s) noexcept {
  return s == FeedbackSource::Human ? "human" : "oracle";
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string to_json_line(const FeedbackRecord& r) {
  json j;
  j["id"] = r.id;
  j["label"] = label_name(r.label);
  j["y_r"] = r.y_r();
  j["source"] = source_name(r.source);
  j["ts"] = r.ts;
  j["session"] = r.session;
  return j.dump() + "\n";
}

FeedbackRecord from_json_line(std::string_view line, std::uint64_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("feedback line is not JSON: ") + e.what(), line_number);
  }
  try {
    FeedbackRecord r;
    r.id = j.at("id").get<std::uint64_t>();
    auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw ParseError("feedback label must be good or bad", line_number);
    r.label = *label;
    if (j.at("y_r").get<int>() != reward_target(r.label)) {
      throw ParseError("feedback y_r disagrees with its label", line_number);
    }
    const auto source = j.at("source").get<std::string>();
    if (source == "human") r.source = FeedbackSource::Human;
    else if (source == "oracle") r.source = FeedbackSource::Oracle;
    else throw ParseError("feedback source must be human or oracle", line_number);
    r.ts = j.at("ts").get<std::string>();
    r.session = j.at("session").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("feedback line is missing a field: ") + e.what(), line_number);
  }
}

namespace {

// Complete lines of the file plus the byte length they span.
std::pair<std::vector<std::string>, std::size_t> complete_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  if (!in) return {lines, 0};
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::size_t start = 0, end = 0;
  while ((end = text.find('\n', start)) != std::string::npos) {
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return {lines, start};
}

std::vector<FeedbackRecord> parse_lines(const std::vector<std::string>& lines) {
  std::vector<FeedbackRecord> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    out.push_back(from_json_line(lines[i], i + 1));
  }
  return out;
}

}  // namespace

std::vector<FeedbackRecord> load_feedback(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw MissingPrerequisite("feedback store " + path.string() + " does not exist", "feedback-auto");
  }
  return parse_lines(complete_lines(path).first);
}

FeedbackStore::FeedbackStore(std::filesystem::path path, bool durable)
    : path_(std::move(path)), durable_(durable) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  auto [lines, valid_bytes] = complete_lines(path_);
  records_ = parse_lines(lines);
  for (const auto& r : records_) {
    if (!keys_.emplace(r.session, r.id).second) {
      throw DuplicateRecordError("store " + path_.string() + " already holds duplicate id " +
                                 std::to_string(r.id));
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error("cannot open feedback store " + path_.string() + ": " + std::strerror(errno));
  // Drop a torn tail so the next append starts on a fresh line.
  if (std::filesystem::file_size(path_) != valid_bytes) {
    if (::ftruncate(fd_, static_cast<off_t>(valid_bytes)) != 0) {
      throw Error("cannot truncate torn tail of " + path_.string());
    }
  }
}

FeedbackStore::~FeedbackStore() {
  if (fd_ >= 0) ::close(fd_);
}

void FeedbackStore::append(const FeedbackRecord& record) {
  const std::string line = to_json_line(record);
  std::lock_guard lock(mutex_);
  if (keys_.contains({record.session, record.id})) {
    throw DuplicateRecordError("sample " + std::to_string(record.id) + " is already labeled in session " +
                               record.session);
  }
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("append to " + path_.string() + " failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (durable_ && ::fdatasync(fd_) != 0) throw Error("fdatasync failed on " + path_.string());
  keys_.emplace(record.session, record.id);
  records_.push_back(record);
}

bool FeedbackStore::contains(const std::string& session, std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  return keys_.contains({session, id});
}

std::vector<FeedbackRecord> FeedbackStore::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t FeedbackStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

// ---------------------------------------------------------------------------

std::size_t CandidateSet::index_of(std::uint64_t id) const {
  auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw ValidationError("unknown candidate id " + std::to_string(id));
  return static_cast<std::size_t>(it - ids.begin());
}

bool CandidateSet::has(std::uint64_t id) const {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

namespace {

json manifest_json(const CandidateSet& s) {
  json j;
  j["generator_sha256"] = s.generator_sha256;
  j["noise"] = {{"density", s.noise.density},
                {"salt_fraction", s.noise.salt_fraction},
                {"sigma", s.noise.sigma},
                {"seed", s.noise.seed}};
  j["dataset"] = s.dataset;
  j["ids"] = s.ids;
  return j;
}

Tensor item(const Tensor& batch, std::size_t i) { return unstack(batch, i); }

}  // namespace

CandidateSet generate_candidates(const ModelParameters& generator, const ArchitectureConfig& arch,
                                 const std::vector<PairedSample>& target,
                                 const std::string& generator_sha256, const NoiseSpec& noise,
                                 const std::string& dataset) {
  if (target.empty()) throw EmptyDatasetError("no target samples to generate candidates for");
  CandidateSet s;
  s.generator_sha256 = generator_sha256;
  s.noise = noise;
  s.dataset = dataset;
  std::vector<std::size_t> all(target.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i] = i;
    s.ids.push_back(target[i].id);
  }
  s.z = stack_noisy(target, all);
  s.reference = stack_clean(target, all);
  s.g = generate(generator, arch, s.z);
  s.session = sha256_hex(manifest_json(s).dump()).substr(0, 16);
  return s;
}

void save_candidates(const CandidateSet& set, const std::filesystem::path& dir) {
  ModelParameters store;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string id = std::to_string(set.ids[i]);
    store.add("z/" + id, item(set.z, i));
    store.add("g/" + id, item(set.g, i));
    store.add("x/" + id, item(set.reference, i));
  }
  save_checkpoint(store, dir / "candidates.ckpt");
  json m = manifest_json(set);
  m["session"] = set.session;
  m["images_sha256"] = sha256_file(dir / "candidates.ckpt");
  const std::string text = m.dump(2) + "\n";
  write_file_atomic(dir / "candidates.json",
                    std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

CandidateSet load_candidates(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "candidates.json";
  const auto images_path = dir / "candidates.ckpt";
  if (!std::filesystem::exists(manifest_path) || !std::filesystem::exists(images_path)) {
    throw MissingPrerequisite("candidates not found in " + dir.string(), "infer");
  }
  std::ifstream in(manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("candidate manifest: ") + e.what(), e.byte);
  }
  CandidateSet s;
  s.session = m.at("session").get<std::string>();
  s.generator_sha256 = m.at("generator_sha256").get<std::string>();
  s.dataset = m.at("dataset").get<std::string>();
  s.noise.density = m.at("noise").at("density").get<double>();
  s.noise.salt_fraction = m.at("noise").at("salt_fraction").get<double>();
  s.noise.sigma = m.at("noise").at("sigma").get<double>();
  s.noise.seed = m.at("noise").at("seed").get<std::uint64_t>();
  s.ids = m.at("ids").get<std::vector<std::uint64_t>>();
  if (sha256_file(images_path) != m.at("images_sha256").get<std::string>()) {
    throw ValidationError("candidates.ckpt does not match its manifest hash");
  }
  const ModelParameters store = load_checkpoint(images_path);
  std::vector<Tensor> z, g, x;
  for (auto id : s.ids) {
    const std::string k = std::to_string(id);
    z.push_back(store.at("z/" + k));
    g.push_back(store.at("g/" + k));
    x.push_back(store.at("x/" + k));
  }
  if (s.ids.empty()) throw ValidationError("candidate manifest lists no ids");
  s.z = stack(z);
  s.g = stack(g);
  s.reference = stack(x);
  return s;
}

void OracleSpec::validate() const {
  if (!(tau_db > 0.0)) throw ConfigError("oracle.tau_db must be > 0");
}

Label oracle_label(const Tensor& candidate, const Tensor& reference, const OracleSpec& spec) {
  return psnr(candidate, reference) >= spec.tau_db ? Label::Good : Label::Bad;
}

LabelCounts label_with_oracle(const CandidateSet& set, FeedbackStore& store, const OracleSpec& spec) {
  spec.validate();
  LabelCounts counts;
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (store.contains(set.session, set.ids[i])) continue;
    FeedbackRecord r;
    r.id = set.ids[i];
    r.label = oracle_label(item(set.g, i), item(set.reference, i), spec);
    r.source = FeedbackSource::Oracle;
    r.ts = utc_timestamp();
    r.session = set.session;
    store.append(r);
    (r.label == Label::Good ? counts.good : counts.bad) += 1;
  }
  return counts;
}

std::vector<std::pair<std::size_t, int>> labeled_indices(const CandidateSet& set,
                                                         const std::vector<FeedbackRecord>& records) {
  std::unordered_map<std::uint64_t, std::size_t> where;
  for (std::size_t i = 0; i < set.size(); ++i) where.emplace(set.ids[i], i);
  std::vector<std::pair<std::size_t, int>> out;
  for (const auto& r : records) {
    if (r.session != set.session) continue;
    auto it = where.find(r.id);
    if (it == where.end()) {
      throw ValidationError("feedback names id " + std::to_string(r.id) + " absent from the candidates");
    }
    out.emplace_back(it->second, r.y_r());
  }
  return out;
}

}  // namespace hfadapt
