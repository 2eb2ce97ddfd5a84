# %% [markdown]
# # Channels, pilots and the training frame
#
# A walk through the desk-scale scenario: two users near an RIS with 16
# elements in four 2x2 sub-surfaces, an 8-antenna BS and 32 subcarriers.

# %%
import numpy as np

from risdip.config import desk_preset
from risdip.estimators import ls_grid, nmse, unmix
from risdip.frame import ImpairmentConfig, dft_pattern, pilot_plan, synth_received
from risdip.linalg import RngStream

cfg = desk_preset()
model = cfg.channel_model()
print("sub-surfaces:", [g.tolist() for g in model.groups])

# %% [markdown]
# Neighbouring elements half a wavelength apart are uncorrelated under the
# sinc model; diagonal neighbours are not.

# %%
print(np.round(model.c_ris[0, :6].real, 3))

# %% [markdown]
# Per-link pathloss. The cascaded path pays two losses. Even summed over
# the whole RIS it stays well below the (obstructed) direct path in this
# small geometry, so the direct channel carries most of the energy.

# %%
for u in range(cfg.n_users):
    b = {k: model.beta(u, k) for k in ("direct", "ue_ris", "ris_bs")}
    cascade = b["ue_ris"] * b["ris_bs"] * np.trace(model.subsurface_coupling)
    print(f"user {u}: " + ", ".join(f"{k} {10 * np.log10(v):.1f} dB" for k, v in b.items())
          + f", cascade over the RIS {10 * np.log10(cascade):.1f} dB")

# %% [markdown]
# One channel draw, comb pilots and a DFT reflection pattern over T = M + 1
# symbols. Without noise and with every subcarrier a pilot, LS followed by
# unmixing returns the direct and cascaded channels exactly.

# %%
real = model.draw(cfg.n_subcarriers, RngStream.for_keys(cfg.seed, "channel", 0))
full = pilot_plan(cfg.n_subcarriers, cfg.n_subcarriers, 1)
one_user = desk_preset(n_users=1, n_pilots=cfg.n_subcarriers).channel_model()
real1 = one_user.draw(cfg.n_subcarriers, RngStream(0, 1))
pat = dft_pattern(cfg.n_subsurfaces)
frame = synth_received(real1, full, pat, 0.0, ImpairmentConfig(), RngStream(0, 2))
print("noiseless NMSE:", nmse(real1.stacked(0), unmix(ls_grid(frame, 0), pat)))

# %% [markdown]
# With the desk comb (8 pilots per user) the remaining error is the
# interpolation between pilots.

# %%
plan = pilot_plan(cfg.n_subcarriers, cfg.n_pilots, cfg.n_users)
print("pilot tones of user 1:", plan.indices[1])
frame = synth_received(real, plan, pat, 0.0, ImpairmentConfig(), RngStream(0, 3))
for method in ("linear", "cubic"):
    est = unmix(ls_grid(frame, 0, method=method), pat)
    print(f"{method:>6} interpolation NMSE: {nmse(real.stacked(0), est):.4f}")
