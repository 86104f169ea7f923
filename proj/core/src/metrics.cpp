#include "cslt/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "cslt/errors.hpp"
#include "cslt/text.hpp"

namespace cslt {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// mteval-13a punctuation set: ASCII punctuation except . , - '
bool is_13a_punct(char c) {
  static const std::string punct = "!\"#$%&()*+/:;<=>?@[\\]^_`{|}~";
  return punct.find(c) != std::string::npos;
}

}  // namespace

std::vector<std::string> tokenize_13a(const std::string& text) {
  const std::string s = to_lower_ascii(text);
  std::string padded;
  padded.reserve(s.size() * 2);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const char prev = i > 0 ? s[i - 1] : ' ';
    const char next = i + 1 < s.size() ? s[i + 1] : ' ';
    if (is_13a_punct(c)) {
      padded += ' ';
      padded += c;
      padded += ' ';
    } else if ((c == '.' || c == ',') && (!is_digit(prev) || !is_digit(next))) {
      // periods and commas stay attached only between digits (3.14)
      padded += ' ';
      padded += c;
      padded += ' ';
    } else if (c == '-' && is_digit(prev)) {
      padded += ' ';
      padded += c;
      padded += ' ';
    } else {
      padded += c;
    }
  }
  return split_ws(padded);
}

namespace {

using NgramCounts = std::unordered_map<std::string, long>;

NgramCounts word_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

NgramCounts char_ngrams(const std::string& s, int n) {
  NgramCounts counts;
  if (static_cast<int>(s.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[s.substr(i, n)];
  return counts;
}

long clipped_matches(const NgramCounts& hyp, const NgramCounts& ref) {
  long matches = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) matches += std::min(count, it->second);
  }
  return matches;
}

long total(const NgramCounts& counts) {
  long t = 0;
  for (const auto& [gram, count] : counts) t += count;
  return t;
}

std::string strip_spaces(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

}  // namespace

double bleu(const std::vector<EvalPair>& pairs, int max_n) {
  if (pairs.empty()) throw ValueError("bleu: empty pair list");
  if (max_n < 1) throw ValueError(concat("bleu: max_n ", max_n));

  std::vector<long> num(max_n, 0), den(max_n, 0);
  long hyp_len = 0, ref_len = 0;
  for (const auto& pair : pairs) {
    const auto hyp = tokenize_13a(pair.hypothesis);
    const auto ref = tokenize_13a(pair.reference);
    hyp_len += static_cast<long>(hyp.size());
    ref_len += static_cast<long>(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      const auto hyp_grams = word_ngrams(hyp, n);
      num[n - 1] += clipped_matches(hyp_grams, word_ngrams(ref, n));
      den[n - 1] += total(hyp_grams);
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_prec_sum = 0.0;
  double smooth = 1.0;  // doubles on every zero-match order (exp smoothing)
  for (int n = 0; n < max_n; ++n) {
    if (den[n] == 0) return 0.0;  // no hypothesis long enough for this order
    double p;
    if (num[n] == 0) {
      smooth *= 2.0;
      p = 1.0 / (smooth * den[n]);
    } else {
      p = static_cast<double>(num[n]) / den[n];
    }
    log_prec_sum += std::log(p);
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / hyp_len));
  return 100.0 * bp * std::exp(log_prec_sum / max_n);
}

namespace {

int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<int> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

}  // namespace

double rouge_l_f1(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw ValueError("rouge_l_f1: empty pair list");
  double sum = 0.0;
  for (const auto& pair : pairs) {
    const auto hyp = tokenize_13a(pair.hypothesis);
    const auto ref = tokenize_13a(pair.reference);
    if (hyp.empty() || ref.empty()) continue;  // pair scores 0
    const int lcs = lcs_length(hyp, ref);
    if (lcs == 0) continue;
    const double p = static_cast<double>(lcs) / hyp.size();
    const double r = static_cast<double>(lcs) / ref.size();
    sum += 2.0 * p * r / (p + r);
  }
  return 100.0 * sum / pairs.size();
}

double chrf(const std::vector<EvalPair>& pairs, int char_n, double beta) {
  if (pairs.empty()) throw ValueError("chrf: empty pair list");
  if (char_n < 1) throw ValueError(concat("chrf: char_n ", char_n));

  std::vector<long> matches(char_n, 0), hyp_total(char_n, 0), ref_total(char_n, 0);
  for (const auto& pair : pairs) {
    const std::string hyp = strip_spaces(pair.hypothesis);
    const std::string ref = strip_spaces(pair.reference);
    for (int n = 1; n <= char_n; ++n) {
      const auto hyp_grams = char_ngrams(hyp, n);
      const auto ref_grams = char_ngrams(ref, n);
      matches[n - 1] += clipped_matches(hyp_grams, ref_grams);
      hyp_total[n - 1] += total(hyp_grams);
      ref_total[n - 1] += total(ref_grams);
    }
  }

  // average over orders that exist in hypothesis or reference, so short
  // identical strings still score 100
  double prec_sum = 0.0, rec_sum = 0.0;
  int orders = 0;
  for (int n = 0; n < char_n; ++n) {
    if (hyp_total[n] == 0 && ref_total[n] == 0) continue;
    ++orders;
    prec_sum += hyp_total[n] > 0 ? static_cast<double>(matches[n]) / hyp_total[n] : 0.0;
    rec_sum += ref_total[n] > 0 ? static_cast<double>(matches[n]) / ref_total[n] : 0.0;
  }
  if (orders == 0) return 0.0;
  const double p = prec_sum / orders;
  const double r = rec_sum / orders;
  const double b2 = beta * beta;
  if (p == 0.0 && r == 0.0) return 0.0;
  return 100.0 * (1.0 + b2) * p * r / (b2 * p + r);
}

MetricReport evaluate_pairs(const std::vector<EvalPair>& pairs) {
  MetricReport report;
  report.n_pairs = static_cast<int>(pairs.size());
  report.bleu1 = bleu(pairs, 1);
  report.bleu4 = bleu(pairs, 4);
  report.rouge_l = rouge_l_f1(pairs);
  report.chrf = chrf(pairs);
  return report;
}

nlohmann::json metric_report_to_json(const MetricReport& report) {
  return nlohmann::json{{"bleu1", report.bleu1},
                        {"bleu4", report.bleu4},
                        {"rougeL", report.rouge_l},
                        {"chrf", report.chrf},
                        {"n_pairs", report.n_pairs}};
}

nlohmann::json metric_signature() {
  return nlohmann::json{
      {"bleu", "corpus|tok:13a-lowercase|smooth:exp|bp:standard|refs:1"},
      {"rouge", "rougeL-F1|pair-mean|tok:13a-lowercase"},
      {"chrf", "chrF|n:6|beta:2|whitespace:removed"}};
}

}  // namespace cslt
