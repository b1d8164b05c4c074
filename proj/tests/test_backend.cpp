#include "skillbench/backend.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <functional>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "skillbench/templates.hpp"
#include "test_util.hpp"

using namespace skillbench;

namespace {

void expect_error(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    FAIL() << "expected " << error_code_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Transcript chat(const std::string& system, const std::string& user) {
  Transcript t;
  t.add(ChatMessage::system(system));
  t.add(ChatMessage::user(user));
  return t;
}

// In-process chat-completions endpoint; the handler decides each reply.
class LocalServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit LocalServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) { handler_(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  Handler handler_;
  int port_ = 0;
  std::thread thread_;
};

nlohmann::json ok_reply(const std::string& content, int prompt_tokens = 0) {
  nlohmann::json body;
  body["choices"] = nlohmann::json::array(
      {nlohmann::json{{"message", {{"role", "assistant"}, {"content", content}}}}});
  if (prompt_tokens > 0) {
    body["usage"] = {{"prompt_tokens", prompt_tokens}, {"completion_tokens", 7}};
  }
  return body;
}

BackendConfig http_config(const std::string& endpoint) {
  BackendConfig config;
  config.kind = BackendKind::Http;
  config.endpoint = endpoint;
  config.model_id = "test-model";
  config.request_timeout_s = 5.0;
  return config;
}

}  // namespace

// ---- token estimate and context guard --------------------------------------------

TEST(TokenEstimate, CeilOfCharsOverFour) {
  EXPECT_EQ(estimate_tokens(chat("", "")), 0u);
  EXPECT_EQ(estimate_tokens(chat("ab", "cd")), 1u);
  EXPECT_EQ(estimate_tokens(chat("abcd", "e")), 2u);
  EXPECT_EQ(estimate_tokens(chat(std::string(100, 'x'), std::string(3, 'y'))), 26u);
}

TEST(ContextGuard, MockRejectsOversizedPrompts) {
  BackendConfig config;
  config.kind = BackendKind::Mock;
  config.context_limit_tokens = 10;
  auto backend = make_backend(config, ScriptedResponses{{{"reply", 0.0}}, 0});
  expect_error(ErrorCode::ContextOverflow,
               [&] { backend->complete(chat(std::string(100, 'x'), "task")); });
}

// ---- http backend ------------------------------------------------------------------

TEST(HttpBackend, SendsBearerTokenAndNoSamplingOverrides) {
  nlohmann::json seen_body;
  std::string seen_auth;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = nlohmann::json::parse(req.body);
    seen_auth = req.get_header_value("Authorization");
    res.set_content(ok_reply("hello").dump(), "application/json");
  });

  ::setenv("SKILLBENCH_API_KEY", "test-key-123", 1);
  auto backend = make_backend(http_config(server.endpoint()));
  const CompletionResult result = backend->complete(chat("be brief", "say hello"));
  ::unsetenv("SKILLBENCH_API_KEY");

  EXPECT_EQ(result.text, "hello");
  EXPECT_GE(result.latency_s, 0.0);
  EXPECT_EQ(seen_auth, "Bearer test-key-123");
  EXPECT_EQ(seen_body["model"], "test-model");
  ASSERT_EQ(seen_body["messages"].size(), 2u);
  EXPECT_EQ(seen_body["messages"][0]["role"], "system");
  EXPECT_EQ(seen_body["messages"][0]["content"], "be brief");
  EXPECT_EQ(seen_body["messages"][1]["role"], "user");
  // The serving side's sampling defaults must apply.
  EXPECT_FALSE(seen_body.contains("temperature"));
  EXPECT_FALSE(seen_body.contains("top_p"));
  EXPECT_FALSE(seen_body.contains("top_k"));
  EXPECT_FALSE(seen_body.contains("max_tokens"));
}

TEST(HttpBackend, NoAuthHeaderWithoutApiKey) {
  bool had_auth = true;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    had_auth = req.has_header("Authorization");
    res.set_content(ok_reply("ok").dump(), "application/json");
  });

  ::unsetenv("SKILLBENCH_API_KEY");
  auto backend = make_backend(http_config(server.endpoint()));
  backend->complete(chat("s", "u"));
  EXPECT_FALSE(had_auth);
}

TEST(HttpBackend, ReportedUsageOverridesTheEstimateNextTime) {
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(ok_reply("ok", 900).dump(), "application/json");
  });

  BackendConfig config = http_config(server.endpoint());
  config.context_limit_tokens = 500;  // estimate for this tiny prompt is far below
  auto backend = make_backend(config);

  const Transcript t = chat("short", "prompt");
  EXPECT_EQ(backend->complete(t).prompt_tokens, 900u);
  // The measured 900 prompt tokens are now trusted over the character
  // estimate, so the identical transcript no longer fits.
  expect_error(ErrorCode::ContextOverflow, [&] { backend->complete(t); });
}

TEST(HttpBackend, ServerErrorsBecomeTransportErrors) {
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  auto backend = make_backend(http_config(server.endpoint()));
  expect_error(ErrorCode::TransportError, [&] { backend->complete(chat("s", "u")); });
}

TEST(HttpBackend, MalformedBodyIsATransportError) {
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices": []})", "application/json");
  });
  auto backend = make_backend(http_config(server.endpoint()));
  expect_error(ErrorCode::TransportError, [&] { backend->complete(chat("s", "u")); });
}

TEST(HttpBackend, UnreachableHostIsATransportError) {
  // Bind a port, then close it so the address is known-dead.
  int dead_port;
  {
    httplib::Server probe;
    dead_port = probe.bind_to_any_port("127.0.0.1");
  }
  BackendConfig config = http_config("http://127.0.0.1:" + std::to_string(dead_port) + "/v1");
  config.request_timeout_s = 2.0;
  auto backend = make_backend(config);
  expect_error(ErrorCode::TransportError, [&] { backend->complete(chat("s", "u")); });
}

TEST(HttpBackend, EndpointMustBeAUrl) {
  expect_error(ErrorCode::ConfigError, [] { make_backend(http_config("localhost:8000")); });
}

// ---- mock backend --------------------------------------------------------------------

TEST(MockBackend, PlaysScriptInOrderThenExhausts) {
  BackendConfig config;
  config.kind = BackendKind::Mock;
  ScriptedResponses script;
  script.responses = {{"first", 1.5}, {"second", 0.25}};
  auto backend = make_backend(config, script);

  const CompletionResult a = backend->complete(chat("s", "u"));
  EXPECT_EQ(a.text, "first");
  EXPECT_DOUBLE_EQ(a.latency_s, 1.5);
  EXPECT_EQ(backend->complete(chat("s", "u")).text, "second");
  expect_error(ErrorCode::ScriptExhausted, [&] { backend->complete(chat("s", "u")); });
}

TEST(LoadScript, AcceptsStringsAndObjects) {
  testutil::TempDir dir("script");
  const auto path = dir.path() / "script.json";
  testutil::write_file(path, R"(["plain reply", {"text": "timed reply", "latency_s": 2.5}])");

  const ScriptedResponses script = load_script(path.string());
  ASSERT_EQ(script.responses.size(), 2u);
  EXPECT_EQ(script.responses[0].text, "plain reply");
  EXPECT_DOUBLE_EQ(script.responses[0].latency_s, 0.0);
  EXPECT_EQ(script.responses[1].text, "timed reply");
  EXPECT_DOUBLE_EQ(script.responses[1].latency_s, 2.5);
}

TEST(LoadScript, RejectsMissingOrMalformedFiles) {
  expect_error(ErrorCode::IoError, [] { load_script("/nonexistent/script.json"); });
  testutil::TempDir dir("badscript");
  const auto path = dir.path() / "script.json";
  testutil::write_file(path, R"({"not": "an array"})");
  expect_error(ErrorCode::ConfigError, [&] { load_script(path.string()); });
}

// ---- heuristic backend -----------------------------------------------------------------

namespace {

SkillHub hub_of(const std::vector<std::pair<std::string, std::string>>& entries) {
  SkillHub hub;
  for (const auto& [name, description] : entries) {
    hub.skills.emplace(name, testutil::make_skill(name, description));
  }
  return hub;
}

}  // namespace

TEST(HeuristicSelect, PicksTheHighestOverlap) {
  const SkillHub hub = hub_of({
      {"currency-rates", "Convert amounts between currencies using daily rates."},
      {"trip-planner", "Plan multi-city travel itineraries with budgets."},
  });
  const SelectionResponse r =
      heuristic_select("please convert 100 eur using daily currency rates", hub);
  ASSERT_EQ(r.skills.size(), 1u);
  EXPECT_EQ(r.skills[0], "currency-rates");
  EXPECT_TRUE(r.message.rfind(templates::kSelectionFoundMessagePrefix, 0) == 0);
}

TEST(HeuristicSelect, NoOverlapMeansNoSkill) {
  const SkillHub hub = hub_of({{"currency-rates", "Convert amounts between currencies."}});
  const SelectionResponse r = heuristic_select("write a poem about cats", hub);
  EXPECT_TRUE(r.skills.empty());
  EXPECT_EQ(r.message, templates::kSelectionNotFoundMessage);
}

TEST(HeuristicSelect, TiesGoToTheLexicographicallySmallerName) {
  const SkillHub hub = hub_of({
      {"zeta-skill", "shared words here"},
      {"alpha-skill", "shared words here"},
  });
  const SelectionResponse r = heuristic_select("shared words here", hub);
  ASSERT_EQ(r.skills.size(), 1u);
  EXPECT_EQ(r.skills[0], "alpha-skill");
}

TEST(HeuristicSelect, RejectsDegenerateInputs) {
  expect_error(ErrorCode::EmptyInput, [] { heuristic_select("task", SkillHub{}); });
  const SkillHub hub = hub_of({{"a-skill", "words"}});
  expect_error(ErrorCode::EmptyInput, [&] { heuristic_select("?!', .", hub); });
}

TEST(HeuristicSelect, AgreesWithTheOverlapOracleOnRandomHubs) {
  std::mt19937_64 gen(20240817);
  const std::vector<std::string> vocab = {
      "alpha", "bravo", "charlie", "delta", "echo",  "foxtrot", "golf",  "hotel",
      "india", "juliet", "kilo",   "lima",  "mike",  "november", "oscar", "papa",
      "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey", "xray",
  };
  auto pick_words = [&](std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (!out.empty()) out += ' ';
      out += vocab[gen() % vocab.size()];
    }
    return out;
  };

  int routed = 0;
  for (int round = 0; round < 1200; ++round) {
    const std::size_t size = 1 + gen() % 100;
    std::vector<std::pair<std::string, std::string>> entries;
    for (std::size_t i = 0; i < size; ++i) {
      std::string description;
      if (!entries.empty() && gen() % 4 == 0) {
        description = entries[gen() % entries.size()].second;  // force tie candidates
      } else {
        description = pick_words(3 + gen() % 6);
      }
      entries.emplace_back("skill-" + std::to_string(i), description);
    }
    const std::string task = pick_words(2 + gen() % 5);

    const SelectionResponse got = heuristic_select(task, hub_of(entries));
    const std::optional<std::string> expected = oracles::route_by_overlap(task, entries);
    if (expected) {
      ASSERT_EQ(got.skills.size(), 1u) << "round " << round;
      EXPECT_EQ(got.skills[0], *expected) << "round " << round;
      ++routed;
    } else {
      EXPECT_TRUE(got.skills.empty()) << "round " << round;
    }
  }
  EXPECT_GT(routed, 100);  // the generator actually produces overlapping cases
}

TEST(HeuristicBackend, AnswersSelectionPromptsFromTheDescriptorList) {
  const SkillHub hub = hub_of({
      {"currency-rates", "Convert amounts between currencies using daily rates."},
      {"trip-planner", "Plan multi-city travel itineraries with budgets."},
  });
  BackendConfig config;
  config.kind = BackendKind::Heuristic;
  auto backend = make_backend(config);

  const Transcript selection =
      render_selection_prompt(hub, "convert 250 eur with daily currency rates");
  const CompletionResult result = backend->complete(selection);
  EXPECT_DOUBLE_EQ(result.latency_s, 0.0);
  const SelectionResponse parsed = parse_selection_json(result.text);
  ASSERT_EQ(parsed.skills.size(), 1u);
  EXPECT_EQ(parsed.skills[0], "currency-rates");
}

TEST(HeuristicBackend, AnswersExecutionPromptsWithTheFixedLabel) {
  const SkillHub hub = hub_of({{"currency-rates", "Convert amounts between currencies."}});
  BackendConfig config;
  config.kind = BackendKind::Heuristic;
  auto backend = make_backend(config);

  const std::vector<Skill> selected = {hub.skills.at("currency-rates")};
  const Transcript execution = render_execution_prompt(selected, "convert 10 eur");
  const CompletionResult result = backend->complete(execution);
  EXPECT_EQ(parse_execution_json(result.text).message, "positive");
}

TEST(HeuristicBackend, SelectionDetectionSurvivesKeywordRenaming) {
  const SkillHub hub = hub_of({
      {"currency-rates", "Convert amounts between currencies using daily rates."},
  });
  BackendConfig config;
  config.kind = BackendKind::Heuristic;
  auto backend = make_backend(config);

  const KeywordVariant expertise{"Expertise"};
  const Transcript selection =
      render_selection_prompt(hub, "convert currencies with daily rates", expertise);
  const SelectionResponse parsed = parse_selection_json(backend->complete(selection).text);
  ASSERT_EQ(parsed.skills.size(), 1u);
  EXPECT_EQ(parsed.skills[0], "currency-rates");

  const Transcript execution = render_execution_prompt(
      {hub.skills.at("currency-rates")}, "convert 10 eur", expertise);
  EXPECT_EQ(parse_execution_json(backend->complete(execution).text).message, "positive");
}

// ---- static model table ------------------------------------------------------------------

TEST(VramDefaults, KnownPrefixesResolve) {
  EXPECT_EQ(default_vram_gb("gemma-3-270m"), 1.0);
  EXPECT_EQ(default_vram_gb("gemma-3-4b-it"), 10.0);
  EXPECT_EQ(default_vram_gb("gemma-3-12b"), 29.0);
  EXPECT_EQ(default_vram_gb("Qwen3-30B-A3B-Instruct-2507"), 72.0);
  EXPECT_EQ(default_vram_gb("qwen3-80b-instruct"), 192.0);
  EXPECT_EQ(default_vram_gb("mystery-model"), std::nullopt);
}
