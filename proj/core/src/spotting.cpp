#include "cslt/spotting.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <sstream>

#include "cslt/errors.hpp"
#include "cslt/rng.hpp"
#include "cslt/text.hpp"

namespace cslt {

std::vector<VocabularyEntry> build_vocabulary(const Corpus& corpus, const Lemmatizer& lemmatizer,
                                              int min_count) {
  std::map<std::string, std::vector<std::pair<std::string, int>>> occ;
  for (const auto& ep : corpus) {
    for (const auto& s : ep.samples) {
      std::set<std::string> sentence_words;
      for (const auto& w : Tokenizer::split_words(s.target)) {
        sentence_words.insert(lemmatizer.lemma(w));
      }
      for (const auto& w : sentence_words) {
        if (w.empty()) continue;
        occ[w].emplace_back(s.video_id, s.subtitle_index);
      }
    }
  }
  std::vector<VocabularyEntry> out;
  for (auto& [word, occurrences] : occ) {
    if (static_cast<int>(occurrences.size()) < min_count) continue;
    out.push_back({word, std::move(occurrences)});
  }
  return out;  // std::map iteration is already lexicographic
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError(concat("cosine_similarity: ", a.size(), " vs ", b.size(), " components"));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

const Lemmatizer& SpottingAnnotator::identity_lemmatizer() {
  static const IdentityLemmatizer lemmatizer;
  return lemmatizer;
}

SpottingAnnotator::SpottingAnnotator(const Corpus& corpus, SpotParams params,
                                     const Lemmatizer& lemmatizer)
    : corpus_(corpus), params_(std::move(params)) {
  if (params_.positives < 1 || params_.negative_ratio < 1) {
    throw ConfigError("spotting: positives and negative_ratio must be positive");
  }
  for (const auto& ep : corpus_) {
    for (const auto& s : ep.samples) {
      SampleRef ref;
      ref.sample = &s;
      std::set<std::string> words;
      for (const auto& w : Tokenizer::split_words(s.target)) words.insert(lemmatizer.lemma(w));
      ref.words.assign(words.begin(), words.end());
      if (by_video_.count(s.video_id)) {
        throw ConfigError(concat("duplicate video_id in corpus: ", s.video_id));
      }
      by_video_[s.video_id] = static_cast<int>(samples_.size());
      samples_.push_back(std::move(ref));
    }
  }
  vocabulary_ = build_vocabulary(corpus_, lemmatizer, params_.min_count);
}

bool SpottingAnnotator::contains_word(const SampleRef& ref, const std::string& word) const {
  return std::binary_search(ref.words.begin(), ref.words.end(), word);
}

const Tensor& SpottingAnnotator::windows_of(const std::string& video_id) {
  auto it = window_cache_.find(video_id);
  if (it != window_cache_.end()) return it->second;
  const Sample& s = *samples_[by_video_.at(video_id)].sample;
  WindowedFeatures wf = sign_embed(s.features, MeanPoolReducer(), params_.window, params_.stride);
  return window_cache_.emplace(video_id, wf.windows).first->second;
}

namespace {

// best similarity of any exemplar window against one reference window
double best_match(const Tensor& ref_windows, int r, const Tensor& ex_windows) {
  const int d = ref_windows.dim(1);
  std::span<const double> ref_row(ref_windows.data().data() + static_cast<std::size_t>(r) * d,
                                  static_cast<std::size_t>(d));
  double best = -1.0;
  const int wn = ex_windows.dim(0);
  for (int w = 0; w < wn; ++w) {
    std::span<const double> ex_row(ex_windows.data().data() + static_cast<std::size_t>(w) * d,
                                   static_cast<std::size_t>(d));
    best = std::max(best, cosine_similarity(ref_row, ex_row));
  }
  return best;
}

}  // namespace

std::optional<SpottingRecord> SpottingAnnotator::spot_word(const VocabularyEntry& word,
                                                           const std::string& reference_video_id) {
  auto ref_it = by_video_.find(reference_video_id);
  if (ref_it == by_video_.end()) {
    throw ValueError(concat("spot_word: unknown video ", reference_video_id));
  }
  const SampleRef& ref = samples_[ref_it->second];
  if (!contains_word(ref, word.word)) {
    throw ValueError(concat("spot_word: word '", word.word, "' not in subtitle of ",
                            reference_video_id));
  }

  std::vector<int> pos_pool, neg_pool;
  for (int i = 0; i < static_cast<int>(samples_.size()); ++i) {
    if (samples_[i].sample->video_id == reference_video_id) continue;
    (contains_word(samples_[i], word.word) ? pos_pool : neg_pool).push_back(i);
  }
  if (pos_pool.empty()) return std::nullopt;  // nothing to vote with

  Rng rng = make_rng(
      derive_seed(params_.seed, word.word, hash_str(reference_video_id)));
  std::vector<int> positives, negatives;
  std::sample(pos_pool.begin(), pos_pool.end(), std::back_inserter(positives),
              params_.positives, rng);
  std::sample(neg_pool.begin(), neg_pool.end(), std::back_inserter(negatives),
              params_.positives * params_.negative_ratio, rng);

  const Tensor& ref_windows = windows_of(reference_video_id);
  const int w_count = ref_windows.dim(0);
  const int n_used = static_cast<int>(positives.size());
  const int vote_min = (n_used + 1) / 2;  // majority of the exemplars actually used

  std::vector<int> pos_votes(w_count, 0), neg_votes(w_count, 0);
  std::vector<double> best_sim(w_count, -1.0);
  for (int e : positives) {
    const Tensor& ex = windows_of(samples_[e].sample->video_id);
    for (int r = 0; r < w_count; ++r) {
      const double sim = best_match(ref_windows, r, ex);
      if (sim > params_.threshold) {
        ++pos_votes[r];
        best_sim[r] = std::max(best_sim[r], sim);
      }
    }
  }
  int negatives_matching_anywhere = 0;
  for (int e : negatives) {
    const Tensor& ex = windows_of(samples_[e].sample->video_id);
    bool matched = false;
    for (int r = 0; r < w_count; ++r) {
      if (best_match(ref_windows, r, ex) > params_.threshold) {
        ++neg_votes[r];
        matched = true;
      }
    }
    if (matched) ++negatives_matching_anywhere;
  }

  if (params_.veto == SpotParams::VetoMode::Global) {
    const int neg_used = static_cast<int>(negatives.size());
    if (neg_used > 0 && negatives_matching_anywhere >= (neg_used + 1) / 2) {
      return std::nullopt;  // non-lexical: the "sign" appears where the word does not
    }
  }

  int best_r = -1;
  long best_margin = 0;
  for (int r = 0; r < w_count; ++r) {
    const long margin = params_.veto == SpotParams::VetoMode::PerWindow
                            ? static_cast<long>(pos_votes[r]) - neg_votes[r]
                            : static_cast<long>(pos_votes[r]);
    if (best_r < 0 || margin > best_margin) {
      best_r = r;
      best_margin = margin;
    }
  }
  if (best_margin < vote_min) return std::nullopt;

  SpottingRecord rec;
  rec.gloss = word.word;
  rec.video_id = reference_video_id;
  rec.window_index = best_r;
  rec.score = best_sim[best_r];
  rec.vote_count = pos_votes[best_r];
  return rec;
}

std::vector<SpottingRecord> SpottingAnnotator::annotate(AnnotateStats* stats) {
  AnnotateStats local;
  local.words = static_cast<int>(vocabulary_.size());

  auto run_range = [this](std::size_t begin, std::size_t end, AnnotateStats& st) {
    std::vector<SpottingRecord> recs;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& entry = vocabulary_[i];
      for (const auto& [video_id, subtitle] : entry.occurrences) {
        ++st.attempts;
        if (static_cast<int>(entry.occurrences.size()) - 1 < params_.positives) {
          ++st.positive_shortfalls;
        }
        auto rec = spot_word(entry, video_id);
        if (rec) {
          recs.push_back(std::move(*rec));
          ++st.emitted;
        }
      }
    }
    return recs;
  };

  std::vector<SpottingRecord> records;
  if (params_.jobs <= 1) {
    records = run_range(0, vocabulary_.size(), local);
  } else {
    // Window cache must be complete before parallel reads.
    for (const auto& [vid, idx] : by_video_) windows_of(vid);
    const int jobs = std::min<int>(params_.jobs, static_cast<int>(vocabulary_.size()));
    std::vector<std::future<std::pair<std::vector<SpottingRecord>, AnnotateStats>>> futures;
    const std::size_t chunk = (vocabulary_.size() + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
      const std::size_t begin = j * chunk;
      const std::size_t end = std::min(vocabulary_.size(), begin + chunk);
      if (begin >= end) break;
      futures.push_back(std::async(std::launch::async, [&, begin, end]() {
        AnnotateStats st;
        auto recs = run_range(begin, end, st);
        return std::make_pair(std::move(recs), st);
      }));
    }
    for (auto& f : futures) {
      auto [recs, st] = f.get();
      records.insert(records.end(), recs.begin(), recs.end());
      local.attempts += st.attempts;
      local.emitted += st.emitted;
      local.positive_shortfalls += st.positive_shortfalls;
      local.negative_shortfalls += st.negative_shortfalls;
    }
  }

  std::sort(records.begin(), records.end(), [](const SpottingRecord& a, const SpottingRecord& b) {
    if (a.video_id != b.video_id) return a.video_id < b.video_id;
    if (a.window_index != b.window_index) return a.window_index < b.window_index;
    return a.gloss < b.gloss;
  });
  if (stats) *stats = local;
  return records;
}

void write_spottings_tsv(const std::string& path, const std::vector<SpottingRecord>& records) {
  std::ostringstream os;
  for (const auto& r : records) {
    os << r.video_id << '\t' << r.gloss << '\t' << r.window_index << '\t'
       << format_double(r.score) << '\t' << r.vote_count << '\n';
  }
  write_file(path, os.str());
}

std::vector<SpottingRecord> read_spottings_tsv(const std::string& path) {
  std::string content = read_file(path);
  std::vector<SpottingRecord> out;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto parts = split_ws(line);
    if (parts.size() != 5) throw ParseError(concat(path, ": want 5 columns"), line_no);
    out.push_back({parts[1], parts[0], static_cast<int>(parse_long(parts[2])),
                   parse_double(parts[3]), static_cast<int>(parse_long(parts[4]))});
  }
  return out;
}

Corpus apply_spottings(const Corpus& corpus, const std::vector<SpottingRecord>& records) {
  std::map<std::string, std::vector<Spotting>> by_video;
  for (const auto& r : records) {
    by_video[r.video_id].push_back({r.gloss, r.window_index});
  }
  Corpus out = corpus;
  for (auto& ep : out) {
    for (auto& s : ep.samples) {
      auto it = by_video.find(s.video_id);
      s.spottings = it == by_video.end() ? std::vector<Spotting>{} : it->second;
    }
  }
  return out;
}

}  // namespace cslt
