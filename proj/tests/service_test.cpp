#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "lacuna/service.hpp"
#include "support/temp_dir.hpp"

namespace lacuna {
namespace {

Checkpoint toy_checkpoint(std::uint64_t seed, std::string regime) {
  const Vocabulary vocab(std::vector<char32_t>{U'ⲁ', U'ⲃ', U'ⲅ', U'ⲇ', U'ⲉ', U' '});
  ModelConfig config;
  config.vocab_size = vocab.size();
  config.embedding_dim = 5;
  config.hidden_dim = 6;
  config.projection_dim = 4;
  config.layers = 1;
  return Checkpoint{vocab, BiLstmMlm<float>::initialized(config, seed), {std::move(regime), 3, 0.25, seed}};
}

Service two_models() {
  return Service({{"random-once", "random-once.ckpt", toy_checkpoint(1, "random-once")},
                  {"smart-dynamic", "smart-dynamic.ckpt", toy_checkpoint(2, "smart-dynamic")}});
}

TEST(Service, ListsNoModels) {
  const ApiResponse r = Service({}).list_models();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body.dump(), R"({"models":[]})");
}

TEST(Service, ListsLoadedModels) {
  const ApiResponse r = two_models().list_models();
  ASSERT_EQ(r.body["models"].size(), 2u);
  const auto& m = r.body["models"][1];
  EXPECT_EQ(m["id"], "smart-dynamic");
  EXPECT_EQ(m["masking"], "smart-dynamic");
  EXPECT_EQ(m["config"]["vocab_size"], 9);
  EXPECT_EQ(m["config"]["layers"], 1);
  EXPECT_EQ(m["config"]["bidirectional"], true);
  EXPECT_EQ(m["dev_accuracy"], 0.25);
}

TEST(Service, IdsComeFromFileStemsAndStayUnique) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "a");
  std::filesystem::create_directories(dir / "b");
  save_checkpoint(dir / "a" / "m.ckpt", toy_checkpoint(1, "random-once"));
  save_checkpoint(dir / "b" / "m.ckpt", toy_checkpoint(2, "smart-once"));
  const Service s = Service::from_paths({dir / "a" / "m.ckpt", dir / "b" / "m.ckpt"});
  EXPECT_EQ(s.models()[0].id, "m");
  EXPECT_EQ(s.models()[1].id, "m-2");
}

TEST(Service, PredictMatchesLibrary) {
  const Service s = two_models();
  const ApiResponse r = s.predict({{"model_id", "random-once"}, {"text", "ⲁⲃ[..]ⲉ"}, {"top_k", 3}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const GapPrediction pred = predict_distributions(parse_line("ⲁⲃ[..]ⲉ"), s.models()[0].checkpoint);
  EXPECT_EQ(r.body["filled_text"], pred.filled_text);
  EXPECT_EQ(r.body["gap_fills"][0], pred.gap_fills[0]);
  ASSERT_EQ(r.body["positions"].size(), 2u);
  EXPECT_EQ(r.body["positions"][0]["index"], 2);
  const auto& top = r.body["positions"][1]["top_k"];
  ASSERT_EQ(top.size(), 3u);
  EXPECT_GE(top[0]["log_prob"].get<double>(), top[1]["log_prob"].get<double>());
  EXPECT_GE(top[1]["log_prob"].get<double>(), top[2]["log_prob"].get<double>());
  EXPECT_EQ(top[0]["char"], s.models()[0].checkpoint.vocab.symbol(pred.greedy[1]));
}

TEST(Service, PredictDefaultsToTenAlternatives) {
  // Six real symbols, so the default of ten is capped.
  const ApiResponse r = two_models().predict({{"model_id", "random-once"}, {"text", "ⲁ[.]"}});
  EXPECT_EQ(r.body["positions"][0]["top_k"].size(), 6u);
}

TEST(Service, RankMatchesLibrary) {
  const Service s = two_models();
  const std::vector<std::string> cands = {"ⲁⲃ", "ⲅⲇ", "ⲉⲉ"};
  const ApiResponse r = s.rank({{"model_id", "smart-dynamic"}, {"text", "ⲁ[..]ⲃ"}, {"candidates", cands}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const auto expected = rank_candidates({parse_line("ⲁ[..]ⲃ"), cands}, s.models()[1].checkpoint);
  EXPECT_EQ(r.body["log_base"], "e");
  ASSERT_EQ(r.body["ranked"].size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.body["ranked"][i]["text"], expected[i].text);
    EXPECT_EQ(r.body["ranked"][i]["log_prob"].get<double>(), expected[i].log_prob);
    EXPECT_EQ(r.body["ranked"][i]["rank"], i + 1);
  }
}

TEST(Service, ErrorsCarryCodeAndStatus) {
  const Service s = two_models();
  auto check = [](const ApiResponse& r, int status, const std::string& code) {
    EXPECT_EQ(r.status, status) << r.body.dump();
    EXPECT_EQ(r.body["code"], code);
    EXPECT_FALSE(r.body["message"].get<std::string>().empty());
  };
  check(s.predict({{"model_id", "nope"}, {"text", "ⲁ[.]"}}), 404, "UnknownModel");
  check(s.predict({{"model_id", "random-once"}, {"text", "ⲁⲃ"}}), 400, "NoGapPresent");
  check(s.predict({{"model_id", "random-once"}, {"text", "ⲁ[ⲃ"}}), 400, "UnbalancedBrackets");
  check(s.predict({{"model_id", "random-once"}}), 400, "BadFormat");
  check(s.predict({{"model_id", "random-once"}, {"text", "ⲁ[.]"}, {"top_k", -1}}), 400, "BadRequest");
  check(s.rank({{"model_id", "random-once"}, {"text", "ⲁ[..]"}, {"candidates", {"ⲁⲁ", "ⲁ"}}}), 400,
        "MixedCandidateLengths");
  check(s.rank({{"model_id", "random-once"}, {"text", "ⲁ[..]"}, {"candidates", Json::array()}}), 400, "NoCandidates");
  check(s.rank({{"model_id", "random-once"}, {"text", "ⲁ[..]"}, {"candidates", "ⲁⲁ"}}), 400, "BadRequest");
  check(s.rank({{"model_id", "random-once"}, {"text", "ⲁ[..]"}, {"candidates", {"ⲁx", "ⲁⲁ"}}}), 400,
        "UnknownCharacter");
}

class LiveServer : public ::testing::Test {
 protected:
  void SetUp() override {
    service_.mount(server_, "http://example.org");
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  Service service_ = two_models();
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST_F(LiveServer, ModelsEndpointSendsCorsHeader) {
  auto res = client().Get("/models");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://example.org");
  EXPECT_EQ(Json::parse(res->body)["models"].size(), 2u);
}

TEST_F(LiveServer, PreflightIsAnswered) {
  auto res = client().Options("/rank");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(LiveServer, UnknownPathAndBadJson) {
  auto missing = client().Get("/nothing");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(Json::parse(missing->body)["code"], "NotFound");

  auto bad = client().Post("/predict", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(Json::parse(bad->body)["code"], "BadRequest");
}

TEST_F(LiveServer, PredictOverHttpMatchesHandler) {
  const Json req = {{"model_id", "random-once"}, {"text", "ⲁ[...]ⲉ"}, {"top_k", 2}};
  auto res = client().Post("/predict", req.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, service_.predict(req).body.dump());
}

TEST_F(LiveServer, ConcurrentIdenticalRequestsGetIdenticalAnswers) {
  const Json req = {{"model_id", "smart-dynamic"}, {"text", "ⲁⲃ[..]ⲅ"},
                    {"candidates", {"ⲁⲁ", "ⲁⲃ", "ⲃⲅ", "ⲇⲉ", "ⲉ "}}};
  const std::string expected = service_.rank(req).body.dump();
  std::vector<std::string> bodies(8);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([&, i] {
      for (int rep = 0; rep < 5; ++rep) {
        auto res = client().Post("/rank", req.dump(), "application/json");
        bodies[i] = res ? res->body : "no response";
        if (bodies[i] != expected) return;
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& b : bodies) EXPECT_EQ(b, expected);
}

}  // namespace
}  // namespace lacuna
