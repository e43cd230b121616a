#include "fewshot/synthetic.hpp"

#include <stdexcept>

#include "fewshot/rng.hpp"

namespace fewshot {

void SyntheticSpec::validate() const {
    if (train_classes == 0 || val_classes == 0 || test_classes == 0)
        throw std::invalid_argument("synthetic spec: every split needs at least one class");
    if (samples_per_class < 1)
        throw std::invalid_argument("synthetic spec: samples per class must be >= 1");
    if (dim < 1) throw std::invalid_argument("synthetic spec: dim must be >= 1");
    if (center_scale < 0.0 || within_stddev < 0.0)
        throw std::invalid_argument("synthetic spec: scales must be non-negative");
}

namespace {

LabeledDataset make_split(const SyntheticSpec& spec, const std::string& name,
                          std::size_t n_classes, RngStream rng) {
    LabeledDataset ds;
    ds.split_name = name;
    const std::size_t n = n_classes * spec.samples_per_class;
    ds.features = Matrix(n, spec.dim);
    ds.labels.resize(n);

    std::vector<double> center(spec.dim);
    std::size_t row = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        for (double& v : center) v = spec.center_scale * rng.next_gaussian();
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            ds.labels[row] = static_cast<int>(c);
            double* feat = ds.features.data.data() + row * spec.dim;
            for (std::size_t dim = 0; dim < spec.dim; ++dim)
                feat[dim] = center[dim] + spec.within_stddev * rng.next_gaussian();
        }
    }
    ds.validate();
    return ds;
}

}  // namespace

DatasetFile generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const RngStream root(spec.seed);
    DatasetFile out;
    out.splits.push_back(make_split(spec, "train", spec.train_classes, root.child("train")));
    out.splits.push_back(make_split(spec, "val", spec.val_classes, root.child("val")));
    out.splits.push_back(make_split(spec, "test", spec.test_classes, root.child("test")));
    return out;
}

}  // namespace fewshot
