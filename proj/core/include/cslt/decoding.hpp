#pragma once

#include <functional>
#include <vector>

#include "cslt/model.hpp"

namespace cslt {

// Returns next-token logits for a prefix that begins with BOS. Both search
// procedures work against this interface, so explicit logit tables can
// stand in for a model in tests.
using StepScorer = std::function<std::vector<double>(const std::vector<int>& prefix)>;

StepScorer model_scorer(TranslationModel& model, const EncodedStreams& encoded);

// Repeatedly appends the argmax token (ties break to the lowest id) until
// EOS or max_len generated tokens; BOS/EOS are stripped from the result.
std::vector<int> greedy_decode(const StepScorer& scorer, int max_len);
std::vector<int> greedy_decode(TranslationModel& model, const EncodedStreams& encoded,
                               int max_len);

// Length-unnormalized log-probability beam search. Hypotheses retire to a
// finished pool at EOS; the best finished hypothesis wins, otherwise the
// best unfinished one at max_len.
std::vector<int> beam_decode(const StepScorer& scorer, int beam, int max_len);
std::vector<int> beam_decode(TranslationModel& model, const EncodedStreams& encoded, int beam,
                             int max_len);

std::vector<double> log_softmax(const std::vector<double>& logits);

}  // namespace cslt
