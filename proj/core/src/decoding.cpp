#include "cslt/decoding.hpp"

#include <algorithm>
#include <cmath>

#include "cslt/errors.hpp"

namespace cslt {

StepScorer model_scorer(TranslationModel& model, const EncodedStreams& encoded) {
  return [&model, &encoded](const std::vector<int>& prefix) {
    return model.decode_step(encoded, prefix).data();
  };
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - mx);
  const double log_z = mx + std::log(denom);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_z;
  return out;
}

std::vector<int> greedy_decode(const StepScorer& scorer, int max_len) {
  if (max_len < 1) throw ConfigError(concat("greedy_decode: max_len ", max_len));
  std::vector<int> prefix = {SpecialTokens::Bos};
  std::vector<int> out;
  for (int step = 0; step < max_len; ++step) {
    const std::vector<double> logits = scorer(prefix);
    int best = 0;
    for (std::size_t v = 1; v < logits.size(); ++v) {
      if (logits[v] > logits[best]) best = static_cast<int>(v);
    }
    if (best == SpecialTokens::Eos) break;
    out.push_back(best);
    prefix.push_back(best);
  }
  return out;
}

std::vector<int> greedy_decode(TranslationModel& model, const EncodedStreams& encoded,
                               int max_len) {
  return greedy_decode(model_scorer(model, encoded), max_len);
}

namespace {

struct Hypothesis {
  std::vector<int> tokens;  // includes leading BOS
  double score = 0.0;
};

struct Candidate {
  double score;
  int hyp;
  int token;
};

std::vector<int> strip_bos(const std::vector<int>& tokens) {
  return std::vector<int>(tokens.begin() + 1, tokens.end());
}

}  // namespace

std::vector<int> beam_decode(const StepScorer& scorer, int beam, int max_len) {
  if (beam < 1) throw ConfigError(concat("beam_decode: beam ", beam));
  if (max_len < 1) throw ConfigError(concat("beam_decode: max_len ", max_len));

  std::vector<Hypothesis> live = {Hypothesis{{SpecialTokens::Bos}, 0.0}};
  std::vector<Hypothesis> finished;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (int h = 0; h < static_cast<int>(live.size()); ++h) {
      const std::vector<double> lp = log_softmax(scorer(live[h].tokens));
      for (int v = 0; v < static_cast<int>(lp.size()); ++v) {
        candidates.push_back({live[h].score + lp[v], h, v});
      }
    }
    // Deterministic order: score desc, then source beam, then token id;
    // with beam = 1 this reproduces greedy's lowest-id tie break.
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.hyp != b.hyp) return a.hyp < b.hyp;
      return a.token < b.token;
    });
    const int keep = std::min<int>(beam, static_cast<int>(candidates.size()));
    std::vector<Hypothesis> next;
    for (int i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Hypothesis ext = live[c.hyp];
      ext.score = c.score;
      if (c.token == SpecialTokens::Eos) {
        finished.push_back(std::move(ext));
      } else {
        ext.tokens.push_back(c.token);
        next.push_back(std::move(ext));
      }
    }
    live = std::move(next);
  }

  const std::vector<Hypothesis>& pool = finished.empty() ? live : finished;
  if (pool.empty()) return {};
  const Hypothesis* best = &pool[0];
  for (const auto& h : pool) {
    if (h.score > best->score) best = &h;
  }
  return strip_bos(best->tokens);
}

std::vector<int> beam_decode(TranslationModel& model, const EncodedStreams& encoded, int beam,
                             int max_len) {
  return beam_decode(model_scorer(model, encoded), beam, max_len);
}

}  // namespace cslt
