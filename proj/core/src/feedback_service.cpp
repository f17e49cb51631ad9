#include "hfadapt/feedback_service.hpp"

#include <httplib.h>

#include <json.hpp>
#include <unordered_map>

#include "hfadapt/error.hpp"
#include "hfadapt/image_codec.hpp"

namespace hfadapt {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxBatch = 256;

HttpReply reply(int status, const json& body) { return {status, body.dump()}; }

HttpReply error_reply(int status, const std::string& message) {
  return reply(status, json{{"error", message}});
}

std::string png_b64(const Tensor& batch, std::size_t i) {
  return base64_encode(encode_png(unstack(batch, i)));
}

}  // namespace

struct FeedbackService::Impl {
  const CandidateSet& candidates;
  FeedbackStore& store;
  std::unordered_map<std::uint64_t, std::size_t> index;
  httplib::Server server;
};

FeedbackService::FeedbackService(const CandidateSet& candidates, FeedbackStore& store)
    : impl_(new Impl{candidates, store, {}, {}}) {
  for (std::size_t i = 0; i < candidates.size(); ++i) impl_->index.emplace(candidates.ids[i], i);

  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Get("/api/batch", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::size_t n = 8;
    if (req.has_param("n")) {
      const std::string text = req.get_param_value("n");
      try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used != text.size() || v < 1) throw std::invalid_argument("n");
        n = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        send(res, error_reply(400, "n must be a positive integer"));
        return;
      }
    }
    send(res, batch(n));
  });
  impl_->server.Post("/api/labels", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, submit(req.body));
  });
  impl_->server.Get("/api/progress", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, progress());
  });
}

FeedbackService::~FeedbackService() { stop(); }

HttpReply FeedbackService::batch(std::size_t n) const {
  const CandidateSet& c = impl_->candidates;
  n = std::min(n, kMaxBatch);
  json items = json::array();
  for (std::size_t i = 0; i < c.size() && items.size() < n; ++i) {
    if (impl_->store.contains(c.session, c.ids[i])) continue;
    items.push_back({{"id", c.ids[i]}, {"z_png", png_b64(c.z, i)}, {"gout_png", png_b64(c.g, i)}});
  }
  return reply(200, json{{"session", c.session}, {"items", std::move(items)}});
}

HttpReply FeedbackService::submit(const std::string& body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error&) {
    return error_reply(400, "body is not valid JSON");
  }
  if (!req.is_object() || !req.contains("labels") || !req["labels"].is_array()) {
    return error_reply(400, "body must be {session, labels:[{id, label}]}");
  }
  const CandidateSet& c = impl_->candidates;
  const bool session_ok = req.contains("session") && req["session"].is_string() &&
                          req["session"].get<std::string>() == c.session;

  std::size_t accepted = 0;
  json rejected = json::array();
  int first_status = 0;
  auto reject = [&](const json& id, const char* reason, int status) {
    rejected.push_back({{"id", id}, {"reason", reason}});
    if (first_status == 0) first_status = status;
  };

  for (const json& item : req["labels"]) {
    const json id = item.is_object() && item.contains("id") ? item["id"] : json(nullptr);
    if (!session_ok) {
      reject(id, "unknown_session", 404);
      continue;
    }
    if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<long long>() >= 0)) {
      reject(id, "unknown_id", 404);
      continue;
    }
    const auto sid = id.get<std::uint64_t>();
    std::optional<Label> label;
    if (item.contains("label") && item["label"].is_string()) label = parse_label(item["label"].get<std::string>());
    if (!label) {
      reject(id, "invalid_label", 422);
      continue;
    }
    if (!impl_->index.contains(sid)) {
      reject(id, "unknown_id", 404);
      continue;
    }
    FeedbackRecord r;
    r.id = sid;
    r.label = *label;
    r.source = FeedbackSource::Human;
    r.ts = utc_timestamp();
    r.session = c.session;
    try {
      impl_->store.append(r);  // durable before we acknowledge
      ++accepted;
    } catch (const DuplicateRecordError&) {
      reject(id, "duplicate", 409);
    }
  }
  const int status = (accepted == 0 && first_status != 0) ? first_status : 200;
  return reply(status, json{{"accepted", accepted}, {"rejected", std::move(rejected)}});
}

HttpReply FeedbackService::progress() const {
  const CandidateSet& c = impl_->candidates;
  std::size_t good = 0, bad = 0;
  for (const auto& r : impl_->store.records()) {
    if (r.session != c.session || !impl_->index.contains(r.id)) continue;
    (r.label == Label::Good ? good : bad) += 1;
  }
  return reply(200, json{{"total", c.size()}, {"labeled", good + bad}, {"good", good}, {"bad", bad}});
}

int FeedbackService::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void FeedbackService::serve() { impl_->server.listen_after_bind(); }

void FeedbackService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace hfadapt
