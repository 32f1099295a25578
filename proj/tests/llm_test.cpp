#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "rebalance/llm.hpp"
#include "rebalance/llm_http.hpp"
#include "test_support.hpp"

using namespace rebalance;

namespace {

LabeledExample example(const std::string& id, const std::string& text, Label label = Label::Negative) {
  return {id, text, label, std::nullopt};
}

GenerationRequest request_for(PatternId p, const LabeledExample& ex, std::uint64_t seed = 1) {
  return {default_pattern(p), ex, 5, 0.8, "gpt-3.5-turbo", seed};
}

Corpus small_corpus() {
  return Corpus({
      example("a", "we lost our baby at 20 weeks and my heart is broken"),
      example("b", "little one arrived early and is in the nicu fighting hard"),
      example("c", "she was born at 39 weeks weighing 7 lbs and we are so happy", Label::Positive),
      example("d", "stillborn at 30 weeks, please keep us in your prayers tonight"),
      example("e", "our rainbow baby came six weeks early and needs help breathing"),
      example("f", "miscarriage again this morning, i do not know how to feel"),
  });
}

}  // namespace

TEST(RenderPrompt, PersonaAndConstraint) {
  auto msgs = render_prompt(default_pattern(PatternId::Persona), "t", 5);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0].role, "user");
  EXPECT_EQ(msgs[0].content.rfind("You are a helpful assistant", 0), 0u);
  EXPECT_NE(msgs[0].content.find("Tweet: t"), std::string::npos);

  msgs = render_prompt(default_pattern(PatternId::Constraint), "some tweet", 5);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_NE(msgs[0].content.find("five different paraphrases"), std::string::npos);
  EXPECT_NE(msgs[0].content.find("cannot use the words from the original tweet"), std::string::npos);
}

TEST(RenderPrompt, MultiturnHasOneMessagePerTurn) {
  const auto msgs = render_prompt(default_pattern(PatternId::MultiturnDialogue), "hello there", 3);
  ASSERT_EQ(msgs.size(), 3u);
  EXPECT_EQ(msgs[0].content, "Do you know how to paraphrase text without changing the original meaning?");
  EXPECT_EQ(msgs[1].role, "assistant");
  EXPECT_EQ(msgs[2].content, "Paraphrase this tweet three times, one version per line: hello there");
}

TEST(RenderPrompt, Validation) {
  EXPECT_THROW(render_prompt({PatternId::Persona, "no placeholder {n}", {}}, "t", 1), MissingPlaceholder);
  EXPECT_THROW(render_prompt({PatternId::MultiturnDialogue, "{text}", {}}, "t", 1), PreconditionError);
  EXPECT_THROW(render_prompt({PatternId::Persona, "{text}", {{"user", "{text}"}}}, "t", 1), PreconditionError);
  for (PatternId p : kAllPatterns) EXPECT_NO_THROW(default_pattern(p).validate());
}

TEST(PromptLibrary, FilesRoundTrip) {
  const auto dir = rebalance::testing::scratch_dir("prompts");
  PromptLibrary lib;
  lib.set({PatternId::Recipe, "Custom {n} for {text}", {}});
  lib.save(dir);
  const auto back = PromptLibrary::load(dir);
  for (PatternId p : kAllPatterns) {
    EXPECT_EQ(back.get(p).template_text, lib.get(p).template_text);
    EXPECT_EQ(back.get(p).turns, lib.get(p).turns);
  }
  EXPECT_EQ(back.get(PatternId::Recipe).template_text, "Custom {n} for {text}");
  EXPECT_THROW(PromptLibrary::load(dir / "nope"), FileNotFound);
  io::write_file(dir / "persona.txt", "missing placeholder\n");
  EXPECT_THROW(PromptLibrary::load(dir), MissingPlaceholder);
}

TEST(ParseVariants, Formats) {
  EXPECT_EQ(parse_variants("1. foo\n2. foo", 5), (std::vector<std::string>{"foo", "foo"}));
  EXPECT_EQ(parse_variants("Here are three:\n- a b\n* c\n\xE2\x80\xA2 d\n", 5),
            (std::vector<std::string>{"a b", "c", "d"}));
  EXPECT_EQ(parse_variants("(1) \"quoted one\"\n2) \xE2\x80\x9C" "curly\xE2\x80\x9D\n\n plain line \n", 5),
            (std::vector<std::string>{"quoted one", "curly", "plain line"}));
  EXPECT_EQ(parse_variants("1. a\n2. b\n3. c", 2), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(parse_variants("2020 was hard", 1), (std::vector<std::string>{"2020 was hard"}));
  EXPECT_THROW(parse_variants("\n  \nSure:\n1. \n", 3), UnparseableResponse);
}

TEST(ChatRequest, FingerprintCoversWireFields) {
  const auto ex = example("a", "text one");
  const auto base = to_chat_request(request_for(PatternId::Persona, ex));
  EXPECT_EQ(base.fingerprint(), to_chat_request(request_for(PatternId::Persona, ex)).fingerprint());
  auto r = request_for(PatternId::Persona, ex);
  r.temperature = 0.2;
  EXPECT_NE(to_chat_request(r).fingerprint(), base.fingerprint());
  EXPECT_NE(to_chat_request(request_for(PatternId::Persona, ex, 2)).fingerprint(), base.fingerprint());
  EXPECT_EQ(base.fingerprint().size(), 16u);

  r = request_for(PatternId::InfiniteGeneration, ex);
  r.n_variants = 15;
  EXPECT_EQ(to_chat_request(r).n_variants, 10u);
  r.n_variants = 21;
  EXPECT_THROW(to_chat_request(r), PreconditionError);
}

TEST(Transcript, JsonlRoundTripAndErrors) {
  Transcript t;
  t.add({"00aa", "1. x\n2. y", "2026-01-01T00:00:00Z"});
  t.add({"00bb", "line \"quoted\"", ""});
  EXPECT_THROW(t.add({"00aa", "dup", ""}), DuplicateFingerprint);
  const auto back = Transcript::from_jsonl(t.to_jsonl());
  EXPECT_EQ(back.entries(), t.entries());
  try {
    Transcript::from_jsonl("{\"fingerprint\":\"1\",\"response\":\"a\"}\nnot json\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(Transcript::from_jsonl(t.to_jsonl() + t.to_jsonl()), DuplicateFingerprint);
}

TEST(Generate, RecordThenReplayIsIdentical) {
  const auto corpus = small_corpus();
  const PromptLibrary prompts;
  const auto requests = plan_requests(corpus, kAllPatterns, prompts, {}, 7);
  ASSERT_EQ(requests.size(), corpus.size() * 7);

  SyntheticTransport synthetic;
  Transcript recorded;
  const auto dir = rebalance::testing::scratch_dir("transcript");
  GenerateOptions rec;
  rec.record_to = &recorded;
  rec.record_path = dir / "t.jsonl";
  rec.clock = [] { return std::string("fixed"); };
  const auto live = generate_batch(requests, synthetic, rec);
  EXPECT_EQ(recorded.size(), requests.size());

  const auto reloaded = Transcript::load(dir / "t.jsonl");
  EXPECT_EQ(reloaded.entries(), recorded.entries());
  ReplayTransport replay(reloaded);
  const auto again = generate_batch(requests, replay);
  EXPECT_EQ(again, live);

  for (std::size_t i = 0; i < requests.size(); ++i) {
    EXPECT_EQ(live[i].size(), effective_variants(requests[i], 10));
    for (const auto& r : live[i]) {
      EXPECT_EQ(r.label, requests[i].source.label);
      EXPECT_EQ(r.parent_id, requests[i].source.id);
      EXPECT_EQ(r.method_id, pattern_name(requests[i].pattern.id));
      EXPECT_NEAR(r.similarity, text_similarity(r.original_text, r.augmented_text), 1e-9);
    }
  }

  auto other = requests.front();
  other.seed += 1;
  EXPECT_THROW(generate(other, replay), ReplayMiss);
}

TEST(Generate, ConcurrencyKeepsRequestOrder) {
  const auto corpus = small_corpus();
  const auto requests = plan_requests(corpus, kAllPatterns, PromptLibrary(), {}, 3);
  SyntheticTransport synthetic;
  Transcript seq_t, par_t;
  GenerateOptions seq;
  seq.max_concurrency = 1;
  seq.record_to = &seq_t;
  seq.clock = [] { return std::string(); };
  GenerateOptions par = seq;
  par.max_concurrency = 8;
  par.record_to = &par_t;
  EXPECT_EQ(generate_batch(requests, synthetic, seq), generate_batch(requests, synthetic, par));
  EXPECT_EQ(seq_t.entries(), par_t.entries());
}

TEST(Generate, SyntheticPatternsDifferInOverlap) {
  const auto corpus = small_corpus();
  const auto requests = plan_requests(corpus, kAllPatterns, PromptLibrary(), {}, 11);
  SyntheticTransport synthetic;
  std::vector<AugmentationRecord> all;
  for (auto& batch : generate_batch(requests, synthetic)) all.insert(all.end(), batch.begin(), batch.end());
  const auto report = pattern_similarity_report(all);
  ASSERT_EQ(report.size(), 7u);
  EXPECT_LT(report.at("constraint").mean, report.at("context_manager").mean);
  for (const auto& [id, stats] : report) {
    if (id != "infinite_generation") {
      EXPECT_LT(report.at("infinite_generation").mean, stats.mean) << id;
    }
  }
}

// ---------------------------------------------------------------------------
// Live transport against a local server

namespace {

class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

struct SleepLog {
  std::vector<std::chrono::milliseconds> waits;
  RetryPolicy policy() {
    RetryPolicy p;
    p.sleep = [this](std::chrono::milliseconds d) { waits.push_back(d); };
    return p;
  }
};

ChatRequest sample_chat() {
  return to_chat_request(request_for(PatternId::Persona, example("a", "some tweet text")));
}

}  // namespace

TEST(HttpTransport, SendsRequestAndParsesReply) {
  std::string auth, model;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    model = nlohmann::json::parse(req.body).at("model");
    res.set_content(completion("1. one\n2. two"), "application/json");
  });
  SleepLog log;
  HttpTransport http(server.url(), "secret", log.policy());
  EXPECT_EQ(http.complete(sample_chat()), "1. one\n2. two");
  EXPECT_EQ(auth, "Bearer secret");
  EXPECT_EQ(model, "gpt-3.5-turbo");
  EXPECT_TRUE(log.waits.empty());
}

TEST(HttpTransport, RetriesServerErrorsWithBackoff) {
  std::atomic<int> calls{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(completion("ok"), "application/json");
  });
  SleepLog log;
  HttpTransport http(server.url(), "k", log.policy());
  EXPECT_EQ(http.complete(sample_chat()), "ok");
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(log.waits, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1000),
                                                                std::chrono::milliseconds(2000)}));
}

TEST(HttpTransport, HonorsRetryAfterAndGivesUp) {
  std::atomic<int> calls{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 429;
    res.set_header("Retry-After", "2.5");
  });
  SleepLog log;
  HttpTransport http(server.url(), "k", log.policy());
  EXPECT_THROW(http.complete(sample_chat()), RateLimited);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(log.waits, (std::vector<std::chrono::milliseconds>(2, std::chrono::milliseconds(2500))));
}

TEST(HttpTransport, ClientErrorsAreNotRetried) {
  std::atomic<int> calls{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 401;
    res.set_content("{\"error\":\"bad key\"}", "application/json");
  });
  SleepLog log;
  HttpTransport http(server.url(), "k", log.policy());
  EXPECT_THROW(http.complete(sample_chat()), TransportError);
  EXPECT_EQ(calls, 1);
}

TEST(HttpTransport, MalformedPayloadAndUnreachableHost) {
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\":[]}", "application/json");
  });
  SleepLog log;
  HttpTransport http(server.url(), "k", log.policy());
  EXPECT_THROW(http.complete(sample_chat()), UnparseableResponse);

  HttpTransport dead("http://127.0.0.1:1/v1/chat/completions", "k", log.policy(), std::chrono::seconds(1));
  EXPECT_THROW(dead.complete(sample_chat()), TransportError);
  EXPECT_THROW(split_endpoint("no-scheme"), ConfigError);
}

TEST(HttpTransport, LiveRepliesRecordAndReplay) {
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const auto prompt = body.at("messages").back().at("content").get<std::string>();
    res.set_content(completion("1. variant of " + prompt.substr(prompt.size() - 5) + "\n2. another"),
                    "application/json");
  });
  const auto corpus = small_corpus();
  const auto requests = plan_requests(corpus, std::vector<PatternId>{PatternId::Recipe}, PromptLibrary(), {}, 5);
  HttpTransport http(server.url(), "k");
  Transcript t;
  GenerateOptions opts;
  opts.record_to = &t;
  const auto live = generate_batch(requests, http, opts);
  ReplayTransport replay(t);
  EXPECT_EQ(generate_batch(requests, replay), live);
}
