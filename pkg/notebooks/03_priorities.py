# %% [markdown]
# # Stream priorities
#
# The design maximizes the smallest weighted SINR, where each stream's
# SINR is divided by its weight.  Doubling the weight of the second
# handset's streams asks for twice their SINR (3 dB) relative to the
# bottleneck streams.

# %%
import numpy as np

from twrelay import model
from twrelay.model import SystemConfig
from twrelay.stage_two import design_transceivers

layout = dict(n_bs=4, n_rs=4, n_ms=(2, 2, 2), streams=(2, 1, 1))
weights = ((1.0, 1.0), (2.0,), (1.0,))


def stream_sinr_db(config, seed):
    ch = model.sample_channels(config, seed)
    res = design_transceivers(config, ch)
    ul, dl = model.sinr_vectors(res.transceivers, ch, config)
    return 10 * np.log10(np.concatenate([ul, dl]))


# %%
plain = SystemConfig.from_snr(20.0, **layout)
weighted = SystemConfig.from_snr(20.0, w_ul=weights, w_dl=weights, **layout)
for seed in range(3):
    a, b = stream_sinr_db(plain, seed), stream_sinr_db(weighted, seed)
    # global stream 2 belongs to the second handset (UL at index 2, DL at 6)
    print(f"draw {seed}: equal weights  user-2 {a[[2, 6]].round(1)}  others {a[[0, 1, 3, 4, 5, 7]].round(1)}")
    print(f"        weighted       user-2 {b[[2, 6]].round(1)}  others {b[[0, 1, 3, 4, 5, 7]].round(1)}")
