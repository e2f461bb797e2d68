#include "scenefield/remote_provider.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <thread>

#include "scenefield/config.hpp"
#include "scenefield/image_io.hpp"

namespace scenefield {

using nlohmann::json;

namespace {

std::string png_field(const RgbImage& image) { return base64_encode(encode_png(image)); }

RgbImage image_field(const json& j, const char* what) {
  if (!j.is_string()) throw ProviderError(std::string("malformed response: ") + what + " is not a string");
  try {
    return decode_png(base64_decode(j.get<std::string>()));
  } catch (const IoError& e) {
    throw ProviderError(std::string("malformed response: ") + what + ": " + e.what());
  }
}

json parse_answer(const std::string& body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw ProviderError("malformed response: expected a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ProviderError(std::string("malformed response: ") + e.what());
  }
}

const json& field(const json& j, const char* key) {
  if (!j.contains(key)) throw ProviderError(std::string("malformed response: missing '") + key + "'");
  return j.at(key);
}

}  // namespace

std::string resolve_provider_url(const std::string& configured) {
  if (const char* env = std::getenv(kProviderUrlEnv); env && *env) return env;
  return configured;
}

RemoteProvider::RemoteProvider(RemoteOptions options) : options_(std::move(options)) {
  if (options_.url.empty()) throw std::invalid_argument("RemoteProvider: empty URL");
  if (options_.attempts < 1) throw std::invalid_argument("RemoteProvider: attempts must be >= 1");
}

std::string RemoteProvider::post(const std::string& path, const std::string& body) {
  httplib::Client client(options_.url);
  const auto timeout = std::chrono::duration<double>(options_.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  std::string last_error;
  auto wait = options_.backoff;
  for (int attempt = 1; attempt <= options_.attempts; ++attempt) {
    const auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status >= 200 && res->status < 300) {
      return res->body;
    } else {
      std::string detail = res->body;
      try {
        const json j = json::parse(res->body);
        detail = j.value("code", std::string("error")) + ": " + j.value("message", std::string());
      } catch (const json::exception&) {
      }
      last_error = "HTTP " + std::to_string(res->status) + " (" + detail + ")";
      if (res->status < 500) break;
    }
    if (attempt < options_.attempts) {
      std::this_thread::sleep_for(wait);
      wait *= 2;
    }
  }
  throw ProviderError(id() + path + ": " + last_error);
}

RgbImage RemoteProvider::do_generate(const std::string& prompt, const CameraViewd& view,
                                     std::uint64_t seed) {
  const json req = {{"prompt", prompt}, {"width", view.width()}, {"height", view.height()}, {"seed", seed}};
  const json ans = parse_answer(post("/v1/generate", req.dump()));
  return image_field(field(ans, "image"), "image");
}

std::vector<RgbImage> RemoteProvider::do_inpaint(const InpaintRequest& r, const CameraViewd&) {
  const json req = {{"prompt", r.prompt},
                    {"image", png_field(r.image)},
                    {"mask", base64_encode(encode_mask_png(r.mask.missing, r.mask.width, r.mask.height))},
                    {"num_candidates", r.candidates},
                    {"seed", r.seed}};
  const json ans = parse_answer(post("/v1/inpaint", req.dump()));
  const json& list = field(ans, "candidates");
  if (!list.is_array()) throw ProviderError("malformed response: candidates is not an array");
  std::vector<RgbImage> out;
  for (const json& c : list) out.push_back(image_field(c, "candidate"));
  return out;
}

DepthMap RemoteProvider::do_estimate_depth(const RgbImage& image, const CameraViewd&) {
  const json req = {{"image", png_field(image)}};
  const json ans = parse_answer(post("/v1/depth", req.dump()));
  const json& d = field(ans, "depth");
  if (!d.is_string()) throw ProviderError("malformed response: depth is not a string");
  try {
    // Every pixel goes back as valid so the base class counts the non-positive ones it drops.
    const Bytes bytes = base64_decode(d.get<std::string>());
    DepthMap depth = decode_pfm(bytes);
    depth.valid.setConstant(true);
    return depth;
  } catch (const IoError& e) {
    throw ProviderError(std::string("malformed response: depth: ") + e.what());
  }
}

Embedding RemoteProvider::do_embed(const RgbImage& image) {
  const json req = {{"image", png_field(image)}};
  const json ans = parse_answer(post("/v1/embed", req.dump()));
  const json& v = field(ans, "vector");
  if (!v.is_array() || v.empty()) throw ProviderError("malformed response: vector is not a non-empty array");
  Embedding e(Eigen::Index(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ProviderError("malformed response: vector entry is not a number");
    e[Eigen::Index(i)] = v[i].get<double>();
  }
  return e;
}

}  // namespace scenefield
