#pragma once

#include "carotid/session.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace carotid::api {

inline constexpr const char* kDefaultBind = "127.0.0.1";
inline constexpr int kDefaultPort = 8475;

struct Request {
  std::string method;  // GET, PUT, POST
  std::string path;    // without the query string
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Cross-section rendered for display: the resampled slice quantized linearly
/// from [window_min, window_max] onto 0..65535, pixels outside the volume are 0.
struct SliceImage {
  int plane_id = 0;
  std::string modality;
  int width = 0;
  int height = 0;
  double spacing = 0.0;
  double window_min = 0.0;
  double window_max = 0.0;
  std::vector<std::uint16_t> pixels;  // width * height, u fastest
};

SliceImage cross_section_image(const ScalarVolume& volume, const CrossSectionPlane& plane,
                               std::string_view modality, double t_ms = 0.0);
/// JSON payload with the pixels as base64 of little-endian uint16.
Json to_json(const SliceImage& image);
std::vector<std::uint16_t> decode_pixels(const Json& payload);

/// In-memory study registry behind the REST routes. Every route is handled by
/// handle(); the HTTP listener only translates requests.
class Service {
public:
  Service() = default;
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Registers a study. A session whose study_id differs is rejected; with a
  /// session_file every accepted write is saved there.
  void add_study(Study study, std::optional<Session> session = std::nullopt,
                 std::optional<std::filesystem::path> session_file = std::nullopt);

  Response handle(const Request& request);

  void set_threads(int threads) { threads_ = threads; }

private:
  struct Entry;
  std::shared_ptr<Entry> find(const std::string& id) const;

  Response route(const Request& request);
  Response list_studies();
  Response describe_study(Entry& e);
  Response post_centerline(Entry& e, const Request& r);
  Response list_planes(Entry& e);
  Response get_image(Entry& e, int plane_id, const Request& r);
  Response get_annotation(Entry& e, int plane_id);
  Response put_annotation(Entry& e, int plane_id, const Request& r);
  Response post_autofit(Entry& e, int plane_id, const Request& r);
  Response post_compute(Entry& e, const std::string& what, const Request& r);
  Response get_session(Entry& e);
  Response put_session(Entry& e, const Request& r);

  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> studies_;
  int threads_ = 0;
};

/// Blocking HTTP listener forwarding every request to a Service.
class HttpServer {
public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds without listening; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace carotid::api
