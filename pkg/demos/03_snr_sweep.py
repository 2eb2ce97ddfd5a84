# %% [markdown]
# # NMSE versus SNR
#
# A short Monte-Carlo sweep. The same run from the shell:
#
#     risdip simulate --preset desk --trials 5 --snr 0,10 --out sweep.csv

# %%
import os
import tempfile

from risdip.config import desk_preset
from risdip.harness import paired_sign_test, run_experiment, write_csv

cfg = desk_preset(trials=5, snr_db=(0.0, 10.0), metric_modes=("dg_block",))
result = run_experiment(cfg)

# %%
for snr in cfg.snr_db:
    line = ", ".join(f"{e} {result.mean(e, snr):.3f}" for e in cfg.estimators)
    print(f"{snr:>4g} dB: {line}")

# %% [markdown]
# Paired comparison: on how many trials did the denoiser beat plain LS?

# %%
for snr in cfg.snr_db:
    s = paired_sign_test(result.records, "dip", "ls", snr)
    print(f"{snr:>4g} dB: {s.wins}/{s.n} trials, p = {s.p_value:.3g}")

# %%
path = os.path.join(tempfile.mkdtemp(), "sweep.csv")
write_csv(result.records, path)
print(open(path).read().splitlines()[:3])
