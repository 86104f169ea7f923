#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cslt {

// Hypothesis/reference sentence pair. Each metric re-tokenizes the raw
// strings itself (13a word split for BLEU/ROUGE, characters for chrF), so
// the pipeline's tokenizer never leaks into scoring.
struct EvalPair {
  std::string hypothesis;
  std::string reference;
};

// Lowercase + mteval-13a-style punctuation splitting.
std::vector<std::string> tokenize_13a(const std::string& text);

// Corpus-level BLEU in [0, 100]: clipped n-gram precisions pooled over the
// corpus, geometric mean over n = 1..max_n with exponential smoothing of
// zero precisions, times the brevity penalty exp(min(0, 1 - ref/hyp)).
double bleu(const std::vector<EvalPair>& pairs, int max_n);

// Mean per-pair LCS F1 (beta = 1), in [0, 100].
double rouge_l_f1(const std::vector<EvalPair>& pairs);

// Corpus-pooled character n-gram F-beta with spaces removed, in [0, 100].
double chrf(const std::vector<EvalPair>& pairs, int char_n = 6, double beta = 2.0);

struct MetricReport {
  double bleu1 = 0.0;
  double bleu4 = 0.0;
  double rouge_l = 0.0;
  double chrf = 0.0;
  int n_pairs = 0;
};

MetricReport evaluate_pairs(const std::vector<EvalPair>& pairs);

nlohmann::json metric_report_to_json(const MetricReport& report);

// Declares the exact metric variants so scores are comparable across runs.
nlohmann::json metric_signature();

}  // namespace cslt
