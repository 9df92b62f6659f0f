"""From raw text to estimate: lexicon features, masking, and transport.

The estimator never sees raw text — it sees a tabular representation. This
demo builds one with a category lexicon (binary indicators per category),
shows pattern masking (the knob behind ``--mask-patterns`` calibration), and
runs the general estimand against a separate target corpus.

Run:  python demos/04_text_featurization.py
"""

import numpy as np

from isoeffect import Dataset, estimate_effect
from isoeffect.featurize import Lexicon, featurize_texts, mask_terms, tokenize

lexicon = Lexicon(categories={
    "fitness": ("run*", "gym", "workout", "exercis*"),
    "diet": ("calorie*", "protein", "salad", "diet*"),
    "social": ("friend*", "party", "meetup"),
})

texts = (
    "Started RUNNING to the gym; counting calories.",
    "Great workout with friends, then a salad.",
    "Party tonight — calories can wait!",
    "Quiet evening, no exercise, ordered pizza.",
)
print("tokenize:", tokenize(texts[0]))
feats = featurize_texts(texts, lexicon, mode="binary")
print("\ncategories:", lexicon.names)
print(feats)

# masking removes every token a pattern matches while preserving the rest of
# the byte stream — re-featurizing the masked corpus is how the calibration
# of a lexical pattern is computed
masked = mask_terms(texts, ["run*", "calorie*"])
print("\nmasked:", masked[0])
print("re-featurized first row:", featurize_texts(masked, lexicon, mode="binary")[0])

# a small synthetic corpus routed through the same machinery end to end
rng = np.random.default_rng(3)
n = 1500
base = rng.random((n, len(lexicon.names))) < (0.35, 0.45, 0.30)
a = (rng.random(n) < 0.3 + 0.4 * base[:, 0]).astype(float)  # fitness-confounded
features = base.astype(float)
y = 2.0 * a + 1.2 * features[:, 0] - 0.5 * features[:, 1] + 0.3 * rng.standard_normal(n)
corpus = Dataset(y=y, a=a, features=features, feature_names=lexicon.names)

est = estimate_effect(corpus, kind="iate", seed=0)
print(f"\nIATE on the source corpus: {est.tau_hat:+.4f} "
      f"(truth 2.0, se {est.standard_error:.4f})")

# transport onto a target corpus with a different non-focal mix
target = (rng.random((2000, 3)) < (0.7, 0.2, 0.5)).astype(float)
est_g = estimate_effect(corpus, kind="general", target_features=target, seed=0)
print(f"general estimand on a shifted target corpus: {est_g.tau_hat:+.4f} "
      f"(se {est_g.standard_error:.4f})")
print("(the effect is homogeneous here, so transport moves the CI, not the point)")
