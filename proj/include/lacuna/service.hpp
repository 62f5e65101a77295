#pragma once

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lacuna/checkpoint.hpp"
#include "lacuna/corpus.hpp"
#include "lacuna/error.hpp"
#include "lacuna/predict.hpp"
#include "lacuna/rank.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that collides with Eigen internals.
#include <httplib.h>

namespace lacuna {

using Json = nlohmann::ordered_json;

struct LoadedModel {
  std::string id;
  std::filesystem::path path;
  Checkpoint checkpoint;
};

struct ApiResponse {
  int status = 200;
  Json body;
};

inline Json api_error(std::string_view code, const std::string& message, const std::string& detail = {}) {
  return Json{{"code", code}, {"message", message}, {"detail", detail}};
}

inline int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadCheckpoint:
    case ErrorCode::VocabMismatch:
    case ErrorCode::Io:
      return 500;
    default:
      return 400;
  }
}

/// Stateless facade over prediction and ranking. The model set is fixed at
/// construction; handlers only read it, so concurrent requests are safe.
class Service {
 public:
  explicit Service(std::vector<LoadedModel> models, std::size_t default_top_k = 10)
      : models_(std::move(models)), default_top_k_(default_top_k) {}

  /// Ids are file stems; repeated stems get a numeric suffix.
  static Service from_paths(const std::vector<std::filesystem::path>& paths) {
    std::vector<LoadedModel> models;
    for (const auto& p : paths) {
      std::string id = p.stem().string();
      std::string unique = id;
      for (int n = 2; std::any_of(models.begin(), models.end(), [&](const auto& m) { return m.id == unique; }); ++n) {
        unique = id + "-" + std::to_string(n);
      }
      models.push_back({unique, p, load_checkpoint(p)});
    }
    return Service(std::move(models));
  }

  const std::vector<LoadedModel>& models() const { return models_; }

  ApiResponse list_models() const {
    Json list = Json::array();
    for (const auto& m : models_) {
      const auto& c = m.checkpoint.model.config();
      list.push_back({{"id", m.id},
                      {"masking", m.checkpoint.meta.regime},
                      {"config",
                       {{"vocab_size", c.vocab_size},
                        {"embedding_dim", c.embedding_dim},
                        {"hidden_dim", c.hidden_dim},
                        {"projection_dim", c.projection_dim},
                        {"layers", c.layers},
                        {"bidirectional", c.bidirectional}}},
                      {"dev_accuracy", m.checkpoint.meta.dev_accuracy}});
    }
    return {200, Json{{"models", list}}};
  }

  ApiResponse predict(const Json& request) const {
    return guarded([&]() -> ApiResponse {
      const LoadedModel* model = nullptr;
      if (auto missing = find_model(request, model)) return *missing;
      const std::string text = string_field(request, "text");
      std::size_t k = default_top_k_;
      if (request.contains("top_k")) {
        const auto& v = request["top_k"];
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) return bad_request("top_k must be a non-negative integer");
        k = v.get<std::size_t>();
      }
      const Sentence sentence = parse_line(text);
      const GapPrediction pred = predict_distributions(sentence, model->checkpoint);
      const auto& vocab = model->checkpoint.vocab;
      Json positions = Json::array();
      for (std::size_t i = 0; i < pred.positions.size(); ++i) {
        Json top = Json::array();
        for (const auto& s : top_k(pred.log_probs.col(static_cast<Eigen::Index>(i)), k)) {
          top.push_back({{"char", vocab.symbol(s.id)}, {"log_prob", s.log_prob}});
        }
        positions.push_back({{"index", pred.positions[i]}, {"top_k", top}});
      }
      return {200, Json{{"filled_text", pred.filled_text}, {"gap_fills", pred.gap_fills}, {"positions", positions}}};
    });
  }

  ApiResponse rank(const Json& request) const {
    return guarded([&]() -> ApiResponse {
      const LoadedModel* model = nullptr;
      if (auto missing = find_model(request, model)) return *missing;
      RankQuery query;
      query.context = parse_line(string_field(request, "text"));
      if (!request.contains("candidates") || !request["candidates"].is_array()) {
        return bad_request("candidates must be an array of strings");
      }
      for (const auto& c : request["candidates"]) {
        if (!c.is_string()) return bad_request("candidates must be an array of strings");
        query.candidates.push_back(c.get<std::string>());
      }
      Json ranked = Json::array();
      for (const auto& r : rank_candidates(query, model->checkpoint)) {
        ranked.push_back({{"text", r.text}, {"log_prob", r.log_prob}, {"rank", r.rank}});
      }
      return {200, Json{{"log_base", "e"}, {"ranked", ranked}}};
    });
  }

  /// Registers the three endpoints plus CORS handling on `server`.
  void mount(httplib::Server& server, std::string cors_origin = "*") const {
    auto send = [cors_origin](httplib::Response& res, const ApiResponse& r) {
      res.status = r.status;
      res.set_header("Access-Control-Allow-Origin", cors_origin);
      res.set_content(r.body.dump(), "application/json");
    };
    server.Get("/models", [this, send](const httplib::Request&, httplib::Response& res) { send(res, list_models()); });
    auto post = [this, send](ApiResponse (Service::*handler)(const Json&) const) {
      return [this, send, handler](const httplib::Request& req, httplib::Response& res) {
        Json body;
        try {
          body = Json::parse(req.body);
        } catch (const Json::parse_error& e) {
          send(res, {400, api_error("BadRequest", "request body is not valid JSON", e.what())});
          return;
        }
        send(res, (this->*handler)(body));
      };
    };
    server.Post("/predict", post(&Service::predict));
    server.Post("/rank", post(&Service::rank));
    server.Options(R"(/.*)", [cors_origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", cors_origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_error_handler([cors_origin](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return;
      const Json body = res.status == 404 ? api_error("NotFound", "no such endpoint", req.path)
                                          : api_error("HttpError", "request failed", std::to_string(res.status));
      res.set_header("Access-Control-Allow-Origin", cors_origin);
      res.set_content(body.dump(), "application/json");
    });
  }

 private:
  static ApiResponse bad_request(const std::string& message) { return {400, api_error("BadRequest", message)}; }

  static std::string string_field(const Json& request, const char* name) {
    if (!request.is_object() || !request.contains(name) || !request[name].is_string()) {
      throw Error(ErrorCode::BadFormat, std::string("field '") + name + "' must be a string");
    }
    return request[name].get<std::string>();
  }

  std::optional<ApiResponse> find_model(const Json& request, const LoadedModel*& out) const {
    const std::string id = string_field(request, "model_id");
    for (const auto& m : models_) {
      if (m.id == id) {
        out = &m;
        return std::nullopt;
      }
    }
    return ApiResponse{404, api_error("UnknownModel", "no model with id '" + id + "'")};
  }

  template <typename F>
  static ApiResponse guarded(F&& f) {
    try {
      return f();
    } catch (const Error& e) {
      return {http_status_for(e.code()), api_error(to_string(e.code()), e.what())};
    }
  }

  std::vector<LoadedModel> models_;
  std::size_t default_top_k_;
};

}  // namespace lacuna
