#pragma once

// Paraphrase generation through a chat-completion model.
//
// A request renders one prompt pattern for one source example. Transports
// turn a ChatRequest into the assistant's raw reply: ReplayTransport serves
// recorded replies from a transcript, SyntheticTransport is an offline
// stand-in used to build fixtures, and HttpTransport (llm_http.hpp) talks to
// a live OpenAI-compatible endpoint.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <ctime>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rebalance/augment.hpp"
#include "rebalance/corpus.hpp"
#include "rebalance/error.hpp"
#include "rebalance/io.hpp"
#include "rebalance/random.hpp"
#include "rebalance/text.hpp"

namespace rebalance {

enum class PatternId {
  Persona,
  Constraint,
  ContextManager,
  InfiniteGeneration,
  MultiturnDialogue,
  OutputAutomator,
  Recipe,
};

inline constexpr PatternId kAllPatterns[] = {
    PatternId::Persona,           PatternId::Constraint,      PatternId::ContextManager,
    PatternId::InfiniteGeneration, PatternId::MultiturnDialogue, PatternId::OutputAutomator,
    PatternId::Recipe,
};

inline std::string_view pattern_name(PatternId p) {
  switch (p) {
    case PatternId::Persona: return "persona";
    case PatternId::Constraint: return "constraint";
    case PatternId::ContextManager: return "context_manager";
    case PatternId::InfiniteGeneration: return "infinite_generation";
    case PatternId::MultiturnDialogue: return "multiturn_dialogue";
    case PatternId::OutputAutomator: return "output_automator";
    case PatternId::Recipe: return "recipe";
  }
  return "";
}

inline std::optional<PatternId> parse_pattern(std::string_view name) {
  for (PatternId p : kAllPatterns) {
    if (pattern_name(p) == name) return p;
  }
  return std::nullopt;
}

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct PromptPattern {
  PatternId id = PatternId::Persona;
  std::string template_text;      // single user message; unused for multiturn
  std::vector<ChatMessage> turns;  // multiturn only, contents are templates

  void validate() const {
    const bool multiturn = id == PatternId::MultiturnDialogue;
    if (multiturn != !turns.empty()) {
      throw PreconditionError(std::string(pattern_name(id)) +
                              (multiturn ? " needs dialogue turns" : " must not have dialogue turns"));
    }
    bool has_text = false;
    if (multiturn) {
      for (const auto& t : turns) {
        if (t.role != "user" && t.role != "assistant" && t.role != "system") {
          throw PreconditionError("unknown dialogue role: " + t.role);
        }
        has_text |= t.content.find("{text}") != std::string::npos;
      }
    } else {
      has_text = template_text.find("{text}") != std::string::npos;
    }
    if (!has_text) throw MissingPlaceholder(std::string(pattern_name(id)) + " template lacks {text}");
  }
};

inline std::string number_word(std::size_t n) {
  static const char* kWords[] = {"zero",     "one",     "two",       "three",    "four",
                                 "five",     "six",     "seven",     "eight",    "nine",
                                 "ten",      "eleven",  "twelve",    "thirteen", "fourteen",
                                 "fifteen",  "sixteen", "seventeen", "eighteen", "nineteen",
                                 "twenty"};
  return n <= 20 ? kWords[n] : std::to_string(n);
}

inline std::string substitute(std::string_view tmpl, std::string_view text, std::size_t n) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.substr(i, 6) == "{text}") {
      out += text;
      i += 6;
    } else if (tmpl.substr(i, 3) == "{n}") {
      out += number_word(n);
      i += 3;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

inline std::vector<ChatMessage> render_prompt(const PromptPattern& pattern, std::string_view source_text,
                                              std::size_t n) {
  pattern.validate();
  if (pattern.turns.empty()) return {{"user", substitute(pattern.template_text, source_text, n)}};
  std::vector<ChatMessage> out;
  for (const auto& t : pattern.turns) out.push_back({t.role, substitute(t.content, source_text, n)});
  return out;
}

// Templates rebuilt from the truncated prompt texts of each pattern.
inline PromptPattern default_pattern(PatternId id) {
  switch (id) {
    case PatternId::Persona:
      return {id,
              "You are a helpful assistant who rewrites social media posts. Write {n} paraphrases "
              "of the tweet below. Keep the meaning, the speaker and the outcome described unchanged. "
              "Return one paraphrase per line.\n\nTweet: {text}",
              {}};
    case PatternId::Constraint:
      return {id,
              "Can you show {n} different paraphrases of each original tweet? Paraphrases cannot use "
              "the words from the original tweet. Return one paraphrase per line.\n\nTweet: {text}",
              {}};
    case PatternId::ContextManager:
      return {id,
              "When paraphrasing the following text, only consider using different words than the "
              "original where a word can be replaced without changing the meaning, and keep the rest "
              "of the text as written. Give {n} paraphrases, one per line.\n\nText: {text}",
              {}};
    case PatternId::InfiniteGeneration:
      return {id,
              "From now on, I want you to generate a text for each input and job until I say stop. "
              "Each text is a new tweet written by the same person about the same event. Generate {n} "
              "texts, one per line.\n\nInput: {text}",
              {}};
    case PatternId::MultiturnDialogue:
      return {id,
              "",
              {{"user", "Do you know how to paraphrase text without changing the original meaning?"},
               {"assistant",
                "Yes. I can reword a text so that it says the same thing in different words. "
                "Send me the text."},
               {"user", "Paraphrase this tweet {n} times, one version per line: {text}"}}};
    case PatternId::OutputAutomator:
      return {id,
              "From now on, whenever you generate text, generate text that restructures the sentences "
              "of the input while keeping its words where possible. Produce {n} versions, one per "
              "line.\n\nInput: {text}",
              {}};
    case PatternId::Recipe:
      return {id,
              "I am trying to augment text data. I know that I need to use synonyms or reorder words "
              "to create new examples. Provide {n} augmented versions of the tweet below, one per "
              "line: replace a few words with synonyms, keep the meaning and keep the length "
              "similar.\n\nTweet: {text}",
              {}};
  }
  throw PreconditionError("unknown prompt pattern");
}

// ---------------------------------------------------------------------------
// Prompt files: prompts/<pattern>.txt. A multiturn file is split into turns
// by lines of the form "@@ role".

inline std::string format_prompt_file(const PromptPattern& p) {
  if (p.turns.empty()) return p.template_text + "\n";
  std::string out;
  for (const auto& t : p.turns) out += "@@ " + t.role + "\n" + t.content + "\n";
  return out;
}

inline std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

inline PromptPattern parse_prompt_file(PatternId id, std::string_view data) {
  PromptPattern p{id, "", {}};
  if (id != PatternId::MultiturnDialogue) {
    p.template_text = strip_trailing_newlines(std::string(data));
  } else {
    std::istringstream in{std::string(data)};
    std::string line;
    std::optional<ChatMessage> current;
    while (std::getline(in, line)) {
      if (line.rfind("@@ ", 0) == 0) {
        if (current) p.turns.push_back(*current);
        current = ChatMessage{std::string(io::trim(line.substr(3))), ""};
      } else if (current) {
        current->content += (current->content.empty() ? "" : "\n") + line;
      }
    }
    if (current) p.turns.push_back(*current);
    for (auto& t : p.turns) t.content = strip_trailing_newlines(t.content);
  }
  p.validate();
  return p;
}

class PromptLibrary {
 public:
  PromptLibrary() {
    for (PatternId id : kAllPatterns) patterns_[id] = default_pattern(id);
  }

  const PromptPattern& get(PatternId id) const { return patterns_.at(id); }

  void set(PromptPattern p) {
    p.validate();
    patterns_[p.id] = std::move(p);
  }

  // Files present in dir override the built-in templates.
  static PromptLibrary load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw FileNotFound(dir.string());
    PromptLibrary lib;
    for (PatternId id : kAllPatterns) {
      const auto path = dir / (std::string(pattern_name(id)) + ".txt");
      if (std::filesystem::exists(path)) lib.set(parse_prompt_file(id, io::read_file(path)));
    }
    return lib;
  }

  void save(const std::filesystem::path& dir) const {
    for (const auto& [id, p] : patterns_) {
      io::write_file(dir / (std::string(pattern_name(id)) + ".txt"), format_prompt_file(p));
    }
  }

 private:
  std::map<PatternId, PromptPattern> patterns_;
};

// ---------------------------------------------------------------------------
// Requests

inline constexpr std::size_t kMaxVariantsPerRequest = 20;

struct LlmSettings {
  std::string endpoint_url = "https://api.openai.com/v1/chat/completions";
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.8;
  std::size_t n_variants = 5;
  std::size_t infinite_generation_cap = 10;
  std::size_t max_concurrency = 4;
};

struct GenerationRequest {
  PromptPattern pattern;
  LabeledExample source;
  std::size_t n_variants = 5;
  double temperature = 0.8;
  std::string model_name = "gpt-3.5-turbo";
  std::uint64_t seed = 0;

  void validate() const {
    if (n_variants < 1 || n_variants > kMaxVariantsPerRequest) {
      throw PreconditionError("n_variants must lie in [1, 20]");
    }
    if (!(temperature >= 0.0)) throw PreconditionError("temperature must be >= 0");
    pattern.validate();
  }
};

// What goes over the wire, plus metadata that stays local.
struct ChatRequest {
  std::string model;
  double temperature = 0.0;
  std::vector<ChatMessage> messages;
  std::size_t n_variants = 0;
  std::uint64_t seed = 0;

  PatternId pattern = PatternId::Persona;
  std::string source_text;

  nlohmann::json canonical() const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", model},
            {"temperature", temperature},
            {"messages", msgs},
            {"n_variants", n_variants},
            {"seed", seed}};
  }

  std::string fingerprint() const { return to_hex(fnv1a64(canonical().dump())); }
};

inline std::size_t effective_variants(const GenerationRequest& r, std::size_t infinite_cap) {
  return r.pattern.id == PatternId::InfiniteGeneration ? std::min(r.n_variants, infinite_cap)
                                                       : r.n_variants;
}

inline ChatRequest to_chat_request(const GenerationRequest& r, std::size_t infinite_cap = 10) {
  r.validate();
  const auto n = effective_variants(r, infinite_cap);
  return {r.model_name, r.temperature, render_prompt(r.pattern, r.source.text, n), n, r.seed,
          r.pattern.id, r.source.text};
}

// ---------------------------------------------------------------------------
// Transcripts

struct TranscriptEntry {
  std::string fingerprint;
  std::string response;
  std::string timestamp;
  bool operator==(const TranscriptEntry&) const = default;
};

inline std::string entry_to_jsonl(const TranscriptEntry& e) {
  return nlohmann::json{{"fingerprint", e.fingerprint}, {"response", e.response}, {"timestamp", e.timestamp}}
             .dump() +
         "\n";
}

class Transcript {
 public:
  void add(TranscriptEntry e) {
    if (!index_.emplace(e.fingerprint, entries_.size()).second) throw DuplicateFingerprint(e.fingerprint);
    entries_.push_back(std::move(e));
  }

  const TranscriptEntry* find(const std::string& fingerprint) const {
    const auto it = index_.find(fingerprint);
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) out += entry_to_jsonl(e);
    return out;
  }

  static Transcript from_jsonl(std::string_view data) {
    Transcript t;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= data.size()) {
      const auto end = std::min(data.find('\n', start), data.size());
      const auto line = io::trim(data.substr(start, end - start));
      ++line_no;
      start = end + 1;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        t.add({j.at("fingerprint").get<std::string>(), j.at("response").get<std::string>(),
               j.value("timestamp", std::string())});
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad transcript entry: ") + e.what(), line_no);
      }
    }
    return t;
  }

  static Transcript load(const std::filesystem::path& path) { return from_jsonl(io::read_file(path)); }

 private:
  std::vector<TranscriptEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Transports

class Transport {
 public:
  virtual ~Transport() = default;
  // Returns the assistant message content. Must be safe to call concurrently.
  virtual std::string complete(const ChatRequest& request) = 0;
};

class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(const Transcript& transcript) : transcript_(transcript) {}

  std::string complete(const ChatRequest& request) override {
    const auto fp = request.fingerprint();
    const auto* e = transcript_.find(fp);
    if (!e) throw ReplayMiss(fp);
    return e->response;
  }

 private:
  const Transcript& transcript_;
};

// Offline paraphraser standing in for a chat model when building fixtures.
// Each pattern keeps a different share of the source words, so the patterns
// differ in lexical overlap the way real generations under them tend to.
class SyntheticTransport : public Transport {
 public:
  std::string complete(const ChatRequest& request) override {
    const auto profile = profile_for(request.pattern);
    const auto words = tokenize(normalize(request.source_text));
    std::ostringstream out;
    if (profile.header) out << "Here are " << number_word(request.n_variants) << " versions:\n";
    for (std::size_t v = 0; v < request.n_variants; ++v) {
      Rng rng(derive_seed(request.seed, fnv1a64(request.source_text) + v));
      const auto text = paraphrase(words, profile, rng);
      switch (profile.style) {
        case Style::Numbered: out << (v + 1) << ". " << text << "\n"; break;
        case Style::Bulleted: out << "- " << text << "\n"; break;
        case Style::Quoted: out << (v + 1) << ") \"" << text << "\"\n"; break;
        case Style::Plain: out << text << "\n\n"; break;
      }
    }
    return out.str();
  }

 private:
  enum class Style { Numbered, Bulleted, Quoted, Plain };

  struct Profile {
    double keep = 1.0;         // chance a source word survives
    std::size_t extra = 0;     // filler words appended
    bool reorder = false;      // rotate clauses
    Style style = Style::Numbered;
    bool header = false;
  };

  static Profile profile_for(PatternId id) {
    switch (id) {
      case PatternId::ContextManager: return {0.85, 0, false, Style::Numbered, false};
      case PatternId::OutputAutomator: return {0.8, 0, true, Style::Bulleted, false};
      case PatternId::Recipe: return {0.7, 1, false, Style::Numbered, true};
      case PatternId::Persona: return {0.65, 2, false, Style::Quoted, false};
      case PatternId::Constraint: return {0.35, 3, false, Style::Numbered, true};
      case PatternId::MultiturnDialogue: return {0.3, 4, true, Style::Plain, false};
      case PatternId::InfiniteGeneration: return {0.15, 6, false, Style::Numbered, false};
    }
    return {};
  }

  static std::string replacement(const std::string& word, Rng& rng) {
    static const std::map<std::string, std::vector<std::string>> kSwaps = {
        {"baby", {"little one", "newborn", "bub"}},     {"born", {"arrived", "delivered"}},
        {"today", {"this morning", "tonight"}},         {"happy", {"thrilled", "overjoyed"}},
        {"love", {"adore", "cherish"}},                 {"weeks", {"wks"}},
        {"pregnant", {"expecting"}},                    {"little", {"tiny", "small"}},
        {"sad", {"heartbroken", "devastated"}},         {"hospital", {"ward", "nicu"}},
        {"early", {"premature", "too soon"}},           {"beautiful", {"gorgeous", "lovely"}},
    };
    static const std::vector<std::string> kFiller = {
        "honestly", "just", "really", "so", "finally", "truly", "still", "again", "now", "wow",
    };
    const auto it = kSwaps.find(word);
    if (it != kSwaps.end()) return rng.pick(it->second);
    return rng.pick(kFiller);
  }

  static std::string paraphrase(const TokenSequence& words, const Profile& p, Rng& rng) {
    TokenSequence out;
    for (const auto& w : words) {
      if (is_punctuation_token(w) || is_sentinel(w) || rng.uniform01() < p.keep) {
        out.push_back(w);
      } else {
        out.push_back(replacement(w, rng));
      }
    }
    if (p.reorder && out.size() > 3) {
      std::rotate(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(out.size() / 2), out.end());
    }
    static const std::vector<std::string> kTail = {"feeling", "blessed", "what", "a", "day",
                                                   "cannot", "believe", "it", "honestly", "wow"};
    for (std::size_t i = 0; i < p.extra; ++i) out.push_back(rng.pick(kTail));
    return detokenize(out);
  }
};

// ---------------------------------------------------------------------------
// Response parsing

inline std::string strip_marker(std::string_view line) {
  auto s = io::trim(line);
  std::size_t i = 0;
  if (!s.empty() && s[0] == '(') {
    std::size_t j = 1;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j > 1 && j < s.size() && s[j] == ')') i = j + 1;
  } else {
    std::size_t j = 0;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j > 0 && j < s.size() && (s[j] == '.' || s[j] == ')' || s[j] == ':')) i = j + 1;
  }
  if (i == 0) {
    if (s.starts_with("- ") || s.starts_with("* ")) i = 2;
    else if (s.starts_with("\xE2\x80\xA2")) i = 3;  // bullet
  }
  s = io::trim(s.substr(i));
  const auto unquote = [&](std::string_view open, std::string_view close) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
      s = io::trim(s.substr(open.size(), s.size() - open.size() - close.size()));
      return true;
    }
    return false;
  };
  if (!unquote("\"", "\"")) unquote("\xE2\x80\x9C", "\xE2\x80\x9D");  // curly quotes
  return std::string(s);
}

// Candidates from a numbered list, bulleted list or plain lines. Lines ending
// in ':' are treated as headings.
inline std::vector<std::string> parse_variants(std::string_view response, std::size_t n) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= response.size() && out.size() < n) {
    const auto end = std::min(response.find('\n', start), response.size());
    const auto raw = io::trim(response.substr(start, end - start));
    start = end + 1;
    if (raw.empty() || raw.back() == ':') continue;
    auto text = strip_marker(raw);
    if (!text.empty()) out.push_back(std::move(text));
  }
  if (out.empty()) throw UnparseableResponse("no paraphrase candidates in model response");
  return out;
}

// ---------------------------------------------------------------------------
// Generation

inline std::vector<AugmentationRecord> records_from_response(const GenerationRequest& request,
                                                             std::string_view response,
                                                             std::size_t n) {
  std::vector<AugmentationRecord> out;
  for (auto& text : parse_variants(response, n)) {
    const double sim = text_similarity(request.source.text, text);
    out.push_back({request.source.id, std::string(pattern_name(request.pattern.id)), request.source.text,
                   std::move(text), sim, request.seed, request.source.label});
  }
  return out;
}

struct GenerateOptions {
  std::size_t max_concurrency = 4;
  std::size_t infinite_generation_cap = 10;
  // When set, every reply is appended here in request order (and to the file
  // if one is given).
  Transcript* record_to = nullptr;
  std::optional<std::filesystem::path> record_path;
  std::function<std::string()> clock;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Results keep request order whatever order the replies arrive in.
inline std::vector<std::vector<AugmentationRecord>> generate_batch(
    const std::vector<GenerationRequest>& requests, Transport& transport, const GenerateOptions& opts = {}) {
  std::vector<ChatRequest> chats;
  chats.reserve(requests.size());
  for (const auto& r : requests) chats.push_back(to_chat_request(r, opts.infinite_generation_cap));

  std::vector<std::optional<std::string>> replies(requests.size());
  std::vector<std::exception_ptr> failures(requests.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < chats.size(); i = next++) {
      try {
        replies[i] = transport.complete(chats[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(opts.max_concurrency, 1, std::max<std::size_t>(1, chats.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (opts.record_to) {
    const auto stamp = opts.clock ? opts.clock : utc_timestamp;
    std::string appended;
    for (std::size_t i = 0; i < chats.size(); ++i) {
      if (!replies[i]) continue;
      const auto fp = chats[i].fingerprint();
      if (opts.record_to->find(fp)) continue;  // identical request already recorded
      TranscriptEntry e{fp, *replies[i], stamp()};
      appended += entry_to_jsonl(e);
      opts.record_to->add(std::move(e));
    }
    if (opts.record_path && !appended.empty()) {
      std::filesystem::create_directories(std::filesystem::absolute(*opts.record_path).parent_path());
      std::ofstream out(*opts.record_path, std::ios::binary | std::ios::app);
      out << appended;
    }
  }

  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  std::vector<std::vector<AugmentationRecord>> out;
  out.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    out.push_back(records_from_response(requests[i], *replies[i], chats[i].n_variants));
  }
  return out;
}

inline std::vector<AugmentationRecord> generate(const GenerationRequest& request, Transport& transport,
                                                const GenerateOptions& opts = {}) {
  return generate_batch({request}, transport, opts).front();
}

// One request per (example, pattern), seeded from the example id and pattern.
inline std::vector<GenerationRequest> plan_requests(const Corpus& corpus, std::span<const PatternId> patterns,
                                                    const PromptLibrary& prompts, const LlmSettings& settings,
                                                    std::uint64_t seed) {
  std::vector<GenerationRequest> out;
  for (const auto& ex : corpus) {
    for (PatternId p : patterns) {
      out.push_back({prompts.get(p), ex, settings.n_variants, settings.temperature, settings.model_name,
                     derive_seed(seed, ex.id + "/" + std::string(pattern_name(p)))});
    }
  }
  return out;
}

inline std::map<std::string, SimilarityStats> pattern_similarity_report(
    std::span<const AugmentationRecord> records) {
  return method_similarity_report(records);
}

}  // namespace rebalance
