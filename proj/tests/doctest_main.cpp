#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_util.hpp"

#include "tsdrd/prob.hpp"

namespace testutil {

tsdrd::Matrix random_prob_rows(std::size_t rows, std::size_t cols,
                               tsdrd::Rng& rng, double spread) {
  tsdrd::Matrix logits = random_matrix(rows, cols, rng, -spread, spread);
  return tsdrd::softmax_rows(logits);
}

}  // namespace testutil
