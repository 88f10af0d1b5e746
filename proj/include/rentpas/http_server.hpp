#pragma once

#include <string>

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include "rentpas/service.hpp"

#include <httplib.h>

namespace rentpas {

// Routes /api/* to the service and, when given, serves static UI assets at "/".
inline void bind_routes(httplib::Server& server, Service& service, const std::string& ui_dir = {}) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    QueryParams params(req.params.begin(), req.params.end());
    const auto out = service.handle(req.method, req.path, params, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get(R"(/api/.*)", forward);
  server.Post(R"(/api/.*)", forward);
  if (!ui_dir.empty() && !server.set_mount_point("/", ui_dir))
    throw Error(ErrorKind::FileUnreadable, "ui directory not found: " + ui_dir);
}

inline int port_from_env(int fallback = 8080) {
  if (const char* p = std::getenv("PAS_PORT")) {
    const int v = std::atoi(p);
    if (v > 0 && v < 65536) return v;
  }
  return fallback;
}

}  // namespace rentpas
