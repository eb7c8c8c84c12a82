# coding: utf-8

# # Watching DER rounds clean up a channel
#
# Each dit-flip rejection (DER) round pairs up the shared pairs, compares
# parities and keeps one pair out of each agreeing couple. Dit flips die out
# quickly. Phase errors pile up, but the no-phase-error label stays the most
# likely one, which is what the later phase correction needs.

import numpy as np

from quditkd.der_map import der_diagnostics, iterate_dstep
from quditkd.isotropic import characteristic_exponent, critical_rounds, d_2cc
from quditkd.pauli_channel import disturbance, from_isotropic, isotropic_from_disturbance
from quditkd.pec_bounds import security_assessment

# ## A qubit channel at 15% disturbance

params = isotropic_from_disturbance(2, 0.15, 0.0)
dist = from_isotropic(params)
print(dist.p)

# After k rounds: dit-flip rate R_D, phase-error rate R_P and the fraction of
# pairs still alive.

for k in range(7):
    evo = der_diagnostics(dist, k)
    print(f"k={k}  R_D={evo.dit_flip_rate:.3e}  R_P={evo.phase_error_rate:.4f}  "
          f"surviving={evo.survival / 2**k:.3e}")

# ## When is one phase-correction pass enough?
#
# The planner asks, round by round, whether a repetition code of length r
# brings the total error below epsilon.

eps = 0.01
for k in range(7):
    a = security_assessment(dist, k, eps)
    print(k, a.sufficient, a.r, f"{a.q_bound:.3g}")
print("closed-form critical round count:", critical_rounds(params, eps))

# From k = 5 on the required r exceeds the 2**62 cap, so the planner reports
# the capped length and its bound stops being informative. Only the first
# sufficient round matters in practice.

# ## Past the tolerable disturbance
#
# Just above D_2CC the sufficient condition never kicks in, however many
# rounds are run. Around k = 21 the phase statistic drowns in rounding and
# the planner raises PrecisionLoss instead of answering.

above = from_isotropic(isotropic_from_disturbance(2, d_2cc(2) + 0.01, 0.0))
print(any(security_assessment(above, k, eps).sufficient for k in range(20)))

# ## Rates and the characteristic exponent
#
# R_D falls like (q_0 - 1/d)^r_ch. With the |p00 - p01| reading, r_ch = 2
# sits exactly on the tolerable-disturbance boundary.

for D in (0.05, 0.15, 0.19, 0.21):
    ce = characteristic_exponent(isotropic_from_disturbance(2, D, 0.0), reading="p00-p01")
    print(f"D={D:.2f}  r_ch={ce.r_ch:.3f}  converged={ce.converged}")

# The symmetry between the two bases is not kept by a D-step, so a round-k
# channel is generally no longer of the two-basis form.

d5 = from_isotropic(isotropic_from_disturbance(5, 0.2, 0.0))
stepped, _ = iterate_dstep(d5, 1)
print(disturbance(stepped), np.abs(stepped.p - stepped.p.T).max())
