"""ABC features and weighted-ROC training on a separable phantom corpus.

Benign phantoms are round uniform disks; malignant ones are lobed and
multicoloured. Asymmetry, border irregularity and colour variegation are
measured on MAM masks and combined into a thresholded score.

    python3 demos/classification.py
"""
from lesionseg.classify import LabeledFeatures, predict, train
from lesionseg.dataset import make_phantom, separable_suite
from lesionseg.evaluation import confusion, format_classification_table
from lesionseg.pipeline import PipelineConfig, features_for, prepare, segment

cfg = PipelineConfig()
data = []
print(f"{'label':<10} {'a':>6} {'b':>6} {'c':>6} {'d_px':>6}")
for p in separable_suite(10):
    img, _, label = make_phantom(p)
    small, _ = prepare(img, None, cfg)
    f = features_for(small, segment("mam", small, cfg=cfg))
    data.append(LabeledFeatures(f, label))
    print(f"{label:<10} {f.a:6.3f} {f.b:6.3f} {f.c:6.3f} {f.d:6.1f}")

clf = train(data)
print(f"\nweights (a, b, c) = {clf.weights}, threshold = {clf.threshold:.4f}")
preds = [predict(clf, d.features) for d in data]
print(format_classification_table([("mam", confusion(preds, [d.label for d in data]))]))
