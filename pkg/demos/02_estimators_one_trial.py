# %% [markdown]
# # Four estimators on one noisy frame
#
# LS, LMMSE, the deep-decoder denoiser and the ON/OFF baseline all see the
# same channel and the same noise.

# %%
import numpy as np

from risdip.config import desk_preset
from risdip.dip import DipConfig, fit_dip, pack
from risdip.harness import noise_variance, prepare_covariances, run_trial

cfg = desk_preset(snr_db=(5.0,), covariance="analytic")
model = cfg.channel_model()
cov = prepare_covariances(cfg, model)
print("noise variance at 5 dB:", noise_variance(cfg, model, 5.0))

# %%
records = run_trial(cfg, trial=0, model=model, cov=cov)
for est in cfg.estimators:
    vals = [r.nmse for r in records if r.estimator == est and r.metric_mode == "dg_block"]
    print(f"{est:>6}: NMSE {np.mean(vals):.4f}")

# %% [markdown]
# The denoiser is fitted from scratch to each noisy grid. The loss keeps
# falling; the network is too small to reproduce the noise exactly, which
# is what does the denoising.

# %%
from risdip.estimators import ls_grid  # noqa: E402
from risdip.frame import dft_pattern, pilot_plan, synth_received  # noqa: E402
from risdip.linalg import RngStream  # noqa: E402

real = model.draw(cfg.n_subcarriers, RngStream.for_keys(cfg.seed, "channel", 0))
plan = pilot_plan(cfg.n_subcarriers, cfg.n_pilots, cfg.n_users)
frame = synth_received(real, plan, dft_pattern(cfg.n_subsurfaces),
                       noise_variance(cfg, model, 5.0), cfg.impairment_config(),
                       RngStream(cfg.seed, 99))
target = pack(ls_grid(frame, 0, method=cfg.interpolation))
_, losses, net = fit_dip(target, DipConfig(width=16, iterations=500))
print(f"{net.n_params} parameters for {target.size} outputs")
print("loss relative to the start at 100, 250, 499:", (losses[[100, 250, 499]] / losses[0]).round(3))
