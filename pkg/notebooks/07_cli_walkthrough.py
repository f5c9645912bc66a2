# %% [markdown]
# The same pipeline through the `sfcast` command. Every call leaves a
# run-manifest.json that `sfcast rerun` can replay.

# %%
import json
import os
import subprocess
import tempfile

work = tempfile.mkdtemp()
os.mkdir(os.path.join(work, "again"))


def sfcast(*args):
    r = subprocess.run(["sfcast", "--quiet", *args], cwd=work, capture_output=True, text=True)
    print("$ sfcast", " ".join(args), "->", r.returncode)
    return r


tiny = ["--window", "20", "--kernel-size", "3", "--filters", "8", "--units", "8",
        "--dense-units", "6,4", "--epochs", "3"]
r = sfcast("train", "--synthetic", "--length", "600", "--period", "60", *tiny, "--seed", "4")
print(json.loads(r.stdout)["final_val"])

# %%
print(sfcast("evaluate", "model.sfmodel.json").stdout)
print(sfcast("predict", "model.sfmodel.json", "--input", ",".join(["10"] * 20)).stdout)
print(sfcast("predict", "model.sfmodel.json", "--input", "1,2,3").stderr)

# %%
# a second run into its own directory, then a replay of its manifest
sfcast("train", "--synthetic", "--length", "600", "--period", "60", *tiny, "--seed", "4",
       "--model-out", "again/model.sfmodel.json")
print(sfcast("rerun", "again/run-manifest.json", "--check").stderr)
