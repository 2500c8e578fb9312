#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dialsynth/corpus.hpp"
#include "dialsynth/icl/episodes.hpp"
#include "dialsynth/structure.hpp"

namespace dialsynth::icl {

/// Annotated exchange usable as an in-context example.
struct Exemplar {
  std::string id;
  std::set<std::string> domains;
  DialogueState context;
  std::string system_utterance;
  std::string user_utterance;
  TurnDelta gold_delta;
  /// Text compared against queries.
  std::string representation;

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

using ExamplePool = std::vector<Exemplar>;

/// Cumulative state followed by the system and user utterances.
std::string representation(const DialogueState& context, std::string_view system_utterance,
                           std::string_view user_utterance);

ExamplePool pool_from_corpus(const Corpus& corpus);
/// One exemplar per turn, the previous gold full state as context.
ExamplePool pool_from_episodes(const std::vector<EvalEpisode>& episodes);

/// Lowercased alphanumeric tokens; other characters separate tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Cosine over term-frequency vectors. 1 for identical non-empty texts,
/// 0 when either side has no tokens.
double tf_cosine(std::string_view a, std::string_view b);

class SimilarityScorer {
 public:
  virtual ~SimilarityScorer() = default;
  /// Symmetric score in [0, 1].
  virtual double score(std::string_view a, std::string_view b) = 0;
  /// Scores of `query` against every candidate, in candidate order.
  virtual std::vector<double> score_all(std::string_view query,
                                        const std::vector<std::string>& candidates);
  virtual std::string describe() const = 0;
};

class TfCosineScorer final : public SimilarityScorer {
 public:
  double score(std::string_view a, std::string_view b) override { return tf_cosine(a, b); }
  std::string describe() const override { return "tf-cosine"; }
};

struct EmbeddingOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "text-embedding-ada-002";
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  std::size_t batch_size = 64;
};

/// Cosine of vectors from an OpenAI-style POST {base_url}/embeddings,
/// clamped to [0, 1]. Embeddings are cached per text.
class EmbeddingScorer final : public SimilarityScorer {
 public:
  explicit EmbeddingScorer(EmbeddingOptions options);

  double score(std::string_view a, std::string_view b) override;
  std::vector<double> score_all(std::string_view query,
                                const std::vector<std::string>& candidates) override;
  std::string describe() const override { return "embedding:" + options_.model; }

 private:
  void fetch(const std::vector<std::string>& texts);
  const std::vector<double>& vector_of(const std::string& text);

  EmbeddingOptions options_;
  std::map<std::string, std::vector<double>> cache_;
  std::mutex mutex_;
};

/// Indices of the top min(k, |pool|) exemplars by non-increasing score;
/// equal scores keep pool order.
std::vector<std::size_t> retrieve_examples(const ExamplePool& pool, std::string_view query, std::size_t k,
                                           SimilarityScorer& scorer);

}  // namespace dialsynth::icl
