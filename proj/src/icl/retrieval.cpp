#include "dialsynth/icl/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <map>

#include "dialsynth/errors.hpp"
#include "dialsynth/icl/evaluator.hpp"
#include "http_client.hpp"
#include "json_util.hpp"

namespace dialsynth::icl {

using jsonutil::json;

std::string representation(const DialogueState& context, std::string_view system_utterance,
                           std::string_view user_utterance) {
  return "[context] " + format_state(context) + " [system] " + std::string(system_utterance) +
         " [user] " + std::string(user_utterance);
}

ExamplePool pool_from_corpus(const Corpus& corpus) {
  ExamplePool pool;
  for (const auto& s : corpus.samples) {
    Exemplar e;
    e.id = s.id;
    e.domains = s.full_state.domains();
    e.domains.insert(s.domain);
    e.context = s.history;
    e.system_utterance = s.system_utterance;
    e.user_utterance = s.user_utterance;
    e.gold_delta = s.turn_delta;
    e.representation = representation(e.context, e.system_utterance, e.user_utterance);
    pool.push_back(std::move(e));
  }
  return pool;
}

ExamplePool pool_from_episodes(const std::vector<EvalEpisode>& episodes) {
  ExamplePool pool;
  for (const auto& ep : episodes) {
    DialogueState context = ep.initial_state;
    for (const auto& t : ep.turns) {
      Exemplar e;
      e.id = ep.episode_id + "#" + std::to_string(t.turn_index);
      e.domains = t.domains;
      e.context = context;
      e.system_utterance = t.system_utterance;
      e.user_utterance = t.user_utterance;
      e.gold_delta = t.gold_turn_state;
      e.representation = representation(e.context, e.system_utterance, e.user_utterance);
      pool.push_back(std::move(e));
      context = t.gold_full_state;
    }
  }
  return pool;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double tf_cosine(std::string_view a, std::string_view b) {
  // Ordered maps keep the summation order independent of argument order, so
  // the score is exactly symmetric.
  std::map<std::string, double> ta, tb;
  for (auto& t : tokenize(a)) ++ta[t];
  for (auto& t : tokenize(b)) ++tb[t];
  if (ta.empty() || tb.empty()) return 0.0;
  double dot = 0, na = 0, nb = 0;
  for (const auto& [t, c] : ta) {
    na += c * c;
    auto it = tb.find(t);
    if (it != tb.end()) dot += c * it->second;
  }
  for (const auto& [_, c] : tb) nb += c * c;
  // Identical bags score exactly 1 regardless of rounding.
  if (ta == tb) return 1.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

std::vector<double> SimilarityScorer::score_all(std::string_view query,
                                                const std::vector<std::string>& candidates) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(score(query, c));
  return out;
}

EmbeddingScorer::EmbeddingScorer(EmbeddingOptions options) : options_(std::move(options)) {
  http::parse_url(options_.base_url);
  if (options_.batch_size == 0) options_.batch_size = 1;
}

void EmbeddingScorer::fetch(const std::vector<std::string>& texts) {
  std::vector<std::string> missing;
  {
    std::lock_guard lock(mutex_);
    for (const auto& t : texts)
      if (!cache_.count(t) && std::find(missing.begin(), missing.end(), t) == missing.end())
        missing.push_back(t);
  }
  for (std::size_t start = 0; start < missing.size(); start += options_.batch_size) {
    const std::size_t end = std::min(missing.size(), start + options_.batch_size);
    json body;
    body["model"] = options_.model;
    body["input"] = std::vector<std::string>(missing.begin() + static_cast<std::ptrdiff_t>(start),
                                             missing.begin() + static_cast<std::ptrdiff_t>(end));
    http::Headers headers;
    if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);
    const auto res = http::post_json(options_.base_url, "/embeddings", body.dump(), headers, options_.timeout);
    if (res.status != 200)
      throw BackendError("embedding endpoint returned HTTP " + std::to_string(res.status));
    try {
      const json reply = json::parse(res.body);
      const json& data = reply.at("data");
      if (data.size() != end - start) throw BackendError("embedding endpoint returned a short batch");
      std::lock_guard lock(mutex_);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
        if (slot >= end - start) throw BackendError("embedding index out of range");
        cache_[missing[start + slot]] = data[i].at("embedding").get<std::vector<double>>();
      }
    } catch (const json::exception& e) {
      throw BackendError(std::string("unexpected embedding body: ") + e.what());
    }
  }
}

const std::vector<double>& EmbeddingScorer::vector_of(const std::string& text) {
  std::lock_guard lock(mutex_);
  return cache_.at(text);
}

namespace {

double vector_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) return 0.0;
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

}  // namespace

double EmbeddingScorer::score(std::string_view a, std::string_view b) {
  const std::string sa(a), sb(b);
  if (tokenize(sa).empty() || tokenize(sb).empty()) return 0.0;
  fetch({sa, sb});
  return sa == sb ? 1.0 : vector_cosine(vector_of(sa), vector_of(sb));
}

std::vector<double> EmbeddingScorer::score_all(std::string_view query,
                                               const std::vector<std::string>& candidates) {
  std::vector<std::string> texts(candidates);
  texts.emplace_back(query);
  fetch(texts);
  const std::string q(query);
  std::vector<double> out;
  for (const auto& c : candidates) out.push_back(c == q ? 1.0 : vector_cosine(vector_of(q), vector_of(c)));
  return out;
}

std::vector<std::size_t> retrieve_examples(const ExamplePool& pool, std::string_view query, std::size_t k,
                                           SimilarityScorer& scorer) {
  if (k == 0 || pool.empty()) return {};
  std::vector<std::string> reps;
  reps.reserve(pool.size());
  for (const auto& e : pool) reps.push_back(e.representation);
  const std::vector<double> scores = scorer.score_all(query, reps);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(k, pool.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                    });
  order.resize(n);
  return order;
}

}  // namespace dialsynth::icl
