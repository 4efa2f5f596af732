"""How the neighbor model forms a prediction, shown on a corpus you can
read in full: distances, tie-breaking, weights, and the near-duplicate
filter that usually runs before indexing.
"""

import numpy as np

from embedfuse.data import PairedDataset
from embedfuse.dedup import FilterConfig, filter_by_similarity
from embedfuse.knn import KnnConfig, knn_fit, knn_predict

ids = np.array([4, 9, 2, 7], dtype="<u8")
images = np.array(
    [
        [0.0, 0.0],  # distance 1 from the query
        [3.0, 0.0],  # distance 2
        [1.0, 2.0],  # distance 2 as well -> tie broken by smaller id
        [1.0, 6.0],  # distance 6, never retrieved with k=3
    ],
    dtype="<f4",
)
texts = np.array(
    [[1, 0, 0], [0, 1, 0], [0, 0, 1], [9, 9, 9]], dtype="<f4"
)
corpus = PairedDataset(ids, images, texts)

index = knn_fit(corpus, KnnConfig(k=3, delta=0.25, index_space="image"))
query = np.array([1.0, 0.0])
pred, neighbors = knn_predict(index, query)

print("query:", query.tolist())
print("neighbor ids:      ", neighbors.neighbor_ids.tolist())
print("distances:         ", neighbors.distances.tolist())
print("weights 1/(d^2+.25):", [round(float(w), 4) for w in neighbors.weights])
print("prediction:        ", [round(float(p), 4) for p in pred])

# The ids 9 and 2 sit at the same distance; ascending id wins, so 2 is
# ranked ahead of 9 in the neighbor list.
assert neighbors.neighbor_ids.tolist() == [4, 2, 9]

# Doubling coef doubles the prediction exactly; direction is unchanged.
double = knn_fit(corpus, KnnConfig(k=3, delta=0.25, coef=2.0, index_space="image"))
pred2, _ = knn_predict(double, query)
print("coef=2 prediction: ", [round(float(p), 4) for p in pred2])
assert np.array_equal(pred2, 2.0 * pred)

# Near-duplicate filtering: id 12 repeats id 10's text embedding almost
# exactly, so the default keep-first rule drops it.
noisy = PairedDataset(
    np.array([10, 11, 12], dtype="<u8"),
    np.eye(3, 2, dtype="<f4"),
    np.array([[1, 0, 0], [0, 1, 0], [0.999, 0.04, 0]], dtype="<f4"),
)
kept, report = filter_by_similarity(noisy, FilterConfig(threshold=0.85))
print(f"filter kept {report.kept_count}, removed ids {report.removed_ids}")
