// Minimal end-to-end tour of the library: build a store, mutate it, run a
// retrieval-interpolated prediction, and inspect the evidence.

#include <iostream>

#include <obknn/obknn.hpp>

int main() {
    using namespace obknn;

    // Three relation labels; the first is the designated "no relation".
    const LabelTable labels({"no_relation", "born_in", "works_for"}, "no_relation");

    // A toy open book: (embedding, label id) pairs.
    std::vector<std::pair<Embedding, std::uint32_t>> records;
    records.emplace_back(Embedding({0.9f, 0.1f}), 1);   // born_in cluster
    records.emplace_back(Embedding({0.8f, 0.2f}), 1);
    records.emplace_back(Embedding({0.1f, 0.9f}), 2);   // works_for cluster
    records.emplace_back(Embedding({0.2f, 0.8f}), 2);
    records.emplace_back(Embedding({0.5f, 0.5f}), 0);   // a stray no_relation
    Datastore store = Datastore::build(records, labels);

    // The store is mutable: append another born_in example.
    store.add(Embedding({0.85f, 0.15f}), 1);

    // A query near the born_in cluster whose base model leans no_relation.
    Query q{Embedding({0.88f, 0.12f}),
            LabelDistribution({0.40f, 0.35f, 0.25f}),
            std::nullopt};

    InferenceConfig cfg;  // k=16, lambda=0.2, euclidean, temperature 1
    cfg.k = 3;

    const Prediction pred = predict(store, q, cfg);
    std::cout << "base argmax:  " << labels.name(argmax_label(q.base_dist)) << "\n";
    std::cout << "prediction:   " << labels.name(pred.label) << "\n";
    std::cout << "neighbors:\n";
    for (const Neighbor& n : pred.neighbors.neighbors) {
        std::cout << "  id " << n.entry_id << "  " << labels.name(n.label_id)
                  << "  d=" << n.distance << "\n";
    }
    std::cout << "final distribution:";
    for (std::size_t i = 0; i < pred.dist.size(); ++i) {
        std::cout << "  " << labels.name(static_cast<std::uint32_t>(i)) << "="
                  << pred.dist[i];
    }
    std::cout << "\n";

    // Round-trip through the binary format.
    store.save("quickstart.obkd");
    const Datastore loaded = Datastore::load("quickstart.obkd");
    std::cout << "reloaded store: " << loaded.size() << " entries, dim " << loaded.dim()
              << "\n";
    return 0;
}
