#include "fewshot/dataset.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fewshot {

std::size_t LabeledDataset::num_classes() const {
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    return static_cast<std::size_t>(max_label + 1);
}

std::vector<std::vector<std::size_t>> LabeledDataset::indices_by_class() const {
    std::vector<std::vector<std::size_t>> by_class(num_classes());
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    return by_class;
}

void LabeledDataset::validate() const {
    if (labels.size() != features.rows)
        throw std::invalid_argument("dataset '" + split_name + "': " +
                                    std::to_string(labels.size()) + " labels for " +
                                    std::to_string(features.rows) + " rows");
    for (int l : labels)
        if (l < 0) throw std::invalid_argument("dataset '" + split_name + "': negative label");
    const auto by_class = indices_by_class();
    for (std::size_t c = 0; c < by_class.size(); ++c)
        if (by_class[c].empty())
            throw std::invalid_argument("dataset '" + split_name + "': class " +
                                        std::to_string(c) + " has no examples");
}

const LabeledDataset& DatasetFile::split(const std::string& name) const {
    for (const auto& s : splits)
        if (s.split_name == name) return s;
    throw std::invalid_argument("dataset has no split named '" + name + "'");
}

bool DatasetFile::has_split(const std::string& name) const {
    for (const auto& s : splits)
        if (s.split_name == name) return true;
    return false;
}

namespace {

constexpr char kMagic[4] = {'F', 'S', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    write_u64(os, bits);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("dataset file: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("dataset file: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& is) {
    const std::uint64_t bits = read_u64(is);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace

void save_dataset(const DatasetFile& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u64(os, ds.dim());
    write_u64(os, ds.splits.size());
    for (const auto& s : ds.splits) {
        s.validate();
        if (s.dim() != ds.dim())
            throw std::invalid_argument("split '" + s.split_name + "' dim mismatch");
        write_u64(os, s.split_name.size());
        os.write(s.split_name.data(), static_cast<std::streamsize>(s.split_name.size()));
        write_u64(os, s.size());
        write_u64(os, s.num_classes());
        for (int l : s.labels) write_u64(os, static_cast<std::uint64_t>(static_cast<std::int64_t>(l)));
        for (double v : s.features.data) write_f64(os, v);
    }
    if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

DatasetFile load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("'" + path + "' is not a dataset file (bad magic)");
    const std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw std::runtime_error("dataset file version " + std::to_string(version) +
                                 " unsupported");
    const std::uint64_t dim = read_u64(is);
    const std::uint64_t n_splits = read_u64(is);
    DatasetFile ds;
    for (std::uint64_t si = 0; si < n_splits; ++si) {
        LabeledDataset s;
        const std::uint64_t name_len = read_u64(is);
        s.split_name.resize(name_len);
        is.read(s.split_name.data(), static_cast<std::streamsize>(name_len));
        const std::uint64_t n = read_u64(is);
        const std::uint64_t n_classes = read_u64(is);
        s.labels.resize(n);
        for (auto& l : s.labels) l = static_cast<int>(static_cast<std::int64_t>(read_u64(is)));
        s.features = Matrix(n, dim);
        for (double& v : s.features.data) v = read_f64(is);
        s.validate();
        if (s.num_classes() != n_classes)
            throw std::runtime_error("split '" + s.split_name + "': class count mismatch");
        ds.splits.push_back(std::move(s));
    }
    return ds;
}

LabeledDataset import_delimited(const std::string& path, const std::string& split_name) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    LabeledDataset out;
    out.split_name = split_name;
    std::vector<double> feat;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        std::vector<double> vals;
        double v;
        while (ss >> v) vals.push_back(v);
        if (vals.empty()) continue;  // blank line
        if (dim == 0) {
            if (vals.size() < 2)
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": need label plus at least one feature");
            dim = vals.size() - 1;
        } else if (vals.size() != dim + 1) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(dim + 1) + " fields, got " +
                                     std::to_string(vals.size()));
        }
        const double label = vals[0];
        if (label < 0 || label != std::floor(label))
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": label must be a non-negative integer");
        out.labels.push_back(static_cast<int>(label));
        feat.insert(feat.end(), vals.begin() + 1, vals.end());
    }
    out.features = Matrix(out.labels.size(), dim, std::move(feat));
    out.validate();
    return out;
}

}  // namespace fewshot
