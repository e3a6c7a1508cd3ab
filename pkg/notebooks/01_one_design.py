# %% [markdown]
# # One relay design, start to finish
#
# A base station with four antennas talks to three two-antenna handsets
# through a four-antenna relay.  The first handset carries two streams in
# each direction, the other two carry one each.  We draw one channel,
# build the aligned first-stage design, then refine the relay precoder and
# the receivers.

# %%
import numpy as np

from twrelay import model
from twrelay.model import SystemConfig
from twrelay.stage_one import stage_one_search
from twrelay.stage_two import design_transceivers

config = SystemConfig.from_snr(15.0, n_bs=4, n_rs=4, n_ms=(2, 2, 2), streams=(2, 1, 1))
channels = model.sample_channels(config, seed=2024)
print(config)

# %% [markdown]
# ## Stage one
#
# The relay equalizer zero-forces the uplink beams.  Each downlink beam is
# then steered into the null space of every other equalizer row, so at the
# relay each uplink stream shares its direction with exactly one downlink
# stream.  The residual below measures how far that holds.

# %%
s1 = stage_one_search(config, channels)
print("beam selection:", s1.selection)
print("alignment residual:", model.alignment_residual(s1.transceivers, channels, config))
print("first-hop min weighted SINR (dB):", 10 * np.log10(s1.achieved_min_weighted_sinr))

# %% [markdown]
# ## Stage two
#
# The loop alternates a bisection over the common SINR target (each probe
# is a small cone program in the relay precoder) with MMSE receivers.  The
# trace can only go up.

# %%
res = design_transceivers(config, channels)
print("iterations:", res.iterations, "converged:", res.converged)
print("trace (dB):", np.round(10 * np.log10(res.trace), 2))

ul, dl = model.sinr_vectors(res.transceivers, channels, config)
print("uplink SINR (dB):  ", np.round(10 * np.log10(ul), 2))
print("downlink SINR (dB):", np.round(10 * np.log10(dl), 2))
print("sum rate (bit/s/Hz):", model.sum_rate(res.transceivers, channels, config))
print("relay power / budget:",
      model.relay_tx_power(res.transceivers, channels, config) / config.p_rs)

# %% [markdown]
# ## Check against a waveform simulation
#
# Push random symbols and noise through both phases, cancel each node's
# own signal and measure what comes out.

# %%
emp = model.simulate_transmission(res.transceivers, channels, config, 100_000, seed=1)
print("empirical / analytic UL:", np.round(emp.ul / ul, 3))
print("empirical / analytic DL:", np.round(emp.dl / dl, 3))
