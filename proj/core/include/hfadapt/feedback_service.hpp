#pragma once

#include <memory>
#include <string>

#include "hfadapt/feedback.hpp"

namespace hfadapt {

struct HttpReply {
  int status = 200;
  std::string body;  // JSON
};

/// HTTP front end for human labeling:
///   GET  /api/batch?n=k  -> {session, items:[{id, z_png, gout_png}]}
///   POST /api/labels     <- {session, labels:[{id, label}]}
///                        -> {accepted, rejected:[{id, reason}]}
///   GET  /api/progress   -> {total, labeled, good, bad}
/// Reference images never leave the process. A POST whose items are all
/// rejected answers with the status of the first rejection (422 bad label,
/// 404 unknown id or session, 409 already labeled); otherwise 200.
class FeedbackService {
 public:
  FeedbackService(const CandidateSet& candidates, FeedbackStore& store);
  ~FeedbackService();
  FeedbackService(const FeedbackService&) = delete;
  FeedbackService& operator=(const FeedbackService&) = delete;

  // Request handlers, usable without a socket.
  HttpReply batch(std::size_t n) const;
  HttpReply submit(const std::string& body);
  HttpReply progress() const;

  // Binds the listener; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); requires bind().
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hfadapt
