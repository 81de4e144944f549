#include <gtest/gtest.h>

#include <cmath>

#include "../common/synthetic.hpp"

TEST(Bimodal, MixtureRecoversBothModesWhileL2Averages) {
  const trajclone::synth::BimodalFit fit = trajclone::synth::fit_left_right(1);
  EXPECT_NEAR(fit.mode_lo, -3.0, 0.1);
  EXPECT_NEAR(fit.mode_hi, 3.0, 0.1);
  EXPECT_NEAR(fit.pi_lo, 0.5, 0.05);
  EXPECT_LT(std::abs(fit.l2_prediction), 0.2);
}
