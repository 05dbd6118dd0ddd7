#include "iwsgd/dataset.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iwsgd/rng.hpp"

namespace iwsgd::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct RawExample {
    std::vector<double> features;
    std::size_t label;
};

// 70/15/15 by largest remainder, applied per class: every class deviates by
// less than one example from exact stratification.
std::array<std::size_t, 3> apportion(std::size_t n) {
    const std::array<double, 3> p{0.70, 0.15, 0.15};
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> frac{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
        const double target = static_cast<double>(n) * p[s];
        counts[s] = static_cast<std::size_t>(target);
        frac[s] = target - static_cast<double>(counts[s]);
        assigned += counts[s];
    }
    while (assigned < n) {
        int best = 0;
        for (int s = 1; s < 3; ++s)
            if (frac[s] > frac[best]) best = s;
        ++counts[best];
        frac[best] = -1.0;
        ++assigned;
    }
    return counts;
}

Dataset assemble(const std::vector<std::vector<RawExample>>& by_class, std::size_t dim,
                 std::size_t num_classes, std::string provenance) {
    Dataset ds;
    ds.dim = dim;
    ds.num_classes = num_classes;
    ds.provenance = std::move(provenance);

    std::array<std::vector<const RawExample*>, 3> splits;
    for (const auto& examples : by_class) {
        const auto counts = apportion(examples.size());
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::size_t i = 0; i < counts[s]; ++i, ++pos) splits[s].push_back(&examples[pos]);
        }
    }

    Split* out[3] = {&ds.train, &ds.validation, &ds.test};
    for (int s = 0; s < 3; ++s) {
        const auto& rows = splits[s];
        if (rows.empty()) continue;  // split stays empty
        Tensor features({rows.size(), dim});
        std::vector<std::size_t> labels;
        labels.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < dim; ++c) features.at(r, c) = rows[r]->features[c];
            labels.push_back(rows[r]->label);
        }
        out[s]->features = std::move(features);
        out[s]->labels = std::move(labels);
    }
    return ds;
}

}  // namespace

Dataset gen_gaussian_blobs(std::size_t n_per_class, std::size_t num_classes, std::size_t dim,
                           double radius, double sigma, std::uint64_t seed) {
    if (n_per_class == 0 || num_classes == 0 || dim == 0) {
        throw DimensionError("gen_gaussian_blobs: all counts must be positive");
    }
    std::vector<std::vector<RawExample>> by_class(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const double angle = 2.0 * kPi * static_cast<double>(c) / static_cast<double>(num_classes);
        std::vector<double> center(dim, 0.0);
        center[0] = radius * std::cos(angle);
        if (dim > 1) center[1] = radius * std::sin(angle);
        for (std::size_t i = 0; i < n_per_class; ++i) {
            rng::Stream stream(seed, rng::StreamKind::Data, c, i, 0);
            RawExample ex;
            ex.label = c;
            ex.features.resize(dim);
            for (std::size_t d = 0; d < dim; ++d)
                ex.features[d] = center[d] + sigma * stream.next_gaussian();
            by_class[c].push_back(std::move(ex));
        }
    }
    std::ostringstream prov;
    prov << "blobs(n=" << n_per_class << ",classes=" << num_classes << ",d=" << dim
         << ",radius=" << radius << ",sigma=" << sigma << ",seed=" << seed << ")";
    return assemble(by_class, dim, num_classes, prov.str());
}

Dataset gen_two_spirals(std::size_t n_per_class, double sigma, double turns, std::uint64_t seed) {
    if (n_per_class == 0) throw DimensionError("gen_two_spirals: n_per_class must be positive");
    std::vector<std::vector<RawExample>> by_class(2);
    for (std::size_t i = 0; i < n_per_class; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n_per_class);
        const double phi = turns * 2.0 * kPi * u;
        const double rho = 0.2 + 0.8 * u;
        rng::Stream stream(seed, rng::StreamKind::Data, 0, i, 1);
        const double nx = sigma * stream.next_gaussian();
        const double ny = sigma * stream.next_gaussian();
        RawExample a;
        a.label = 0;
        a.features = {rho * std::cos(phi) + nx, rho * std::sin(phi) + ny};
        rng::Stream stream_b(seed, rng::StreamKind::Data, 1, i, 1);
        const double bx = sigma * stream_b.next_gaussian();
        const double by = sigma * stream_b.next_gaussian();
        RawExample b;
        b.label = 1;
        // exact point reflection of the noiseless class-0 point
        b.features = {-(rho * std::cos(phi)) + bx, -(rho * std::sin(phi)) + by};
        by_class[0].push_back(std::move(a));
        by_class[1].push_back(std::move(b));
    }
    std::ostringstream prov;
    prov << "spirals(n=" << n_per_class << ",sigma=" << sigma << ",turns=" << turns
         << ",seed=" << seed << ")";
    return assemble(by_class, 2, 2, prov.str());
}

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path, const char* what) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw IdxError(path + ": truncated while reading " + what);
    }
    return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
           (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const unsigned char bytes[4] = {static_cast<unsigned char>(v >> 24),
                                    static_cast<unsigned char>(v >> 16),
                                    static_cast<unsigned char>(v >> 8),
                                    static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Split load_idx(const std::string& images_path, const std::string& labels_path, std::size_t limit) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw IdxError(images_path + ": cannot open images file");
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw IdxError(labels_path + ": cannot open labels file");

    const std::uint32_t images_magic = read_u32_be(images, images_path, "images magic");
    if (images_magic != kImagesMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad magic 0x%08x, expected 0x%08x", images_magic,
                      kImagesMagic);
        throw IdxError(images_path + ": " + buf);
    }
    const std::uint32_t image_count = read_u32_be(images, images_path, "image count");
    const std::uint32_t rows = read_u32_be(images, images_path, "row count");
    const std::uint32_t cols = read_u32_be(images, images_path, "column count");

    const std::uint32_t labels_magic = read_u32_be(labels, labels_path, "labels magic");
    if (labels_magic != kLabelsMagic) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "bad magic 0x%08x, expected 0x%08x", labels_magic,
                      kLabelsMagic);
        throw IdxError(labels_path + ": " + buf);
    }
    const std::uint32_t label_count = read_u32_be(labels, labels_path, "label count");

    if (image_count != label_count) {
        throw IdxError("count mismatch: " + images_path + " has " + std::to_string(image_count) +
                       " images but " + labels_path + " has " + std::to_string(label_count) +
                       " labels");
    }

    std::size_t n = image_count;
    if (limit > 0 && limit < n) n = limit;
    const std::size_t pixels_per_image = std::size_t(rows) * std::size_t(cols);
    if (n == 0 || pixels_per_image == 0) {
        throw IdxError(images_path + ": empty image set");
    }

    std::vector<std::uint8_t> pixel_bytes(n * pixels_per_image);
    if (!images.read(reinterpret_cast<char*>(pixel_bytes.data()),
                     static_cast<std::streamsize>(pixel_bytes.size()))) {
        throw IdxError(images_path + ": truncated while reading pixel data");
    }
    std::vector<std::uint8_t> label_bytes(n);
    if (!labels.read(reinterpret_cast<char*>(label_bytes.data()),
                     static_cast<std::streamsize>(label_bytes.size()))) {
        throw IdxError(labels_path + ": truncated while reading label data");
    }

    Split split;
    split.features = Tensor({n, pixels_per_image});
    for (std::size_t i = 0; i < pixel_bytes.size(); ++i) {
        split.features[i] = static_cast<double>(pixel_bytes[i]) / 255.0;
    }
    split.labels.assign(label_bytes.begin(), label_bytes.end());
    return split;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& labels) {
    if (pixels.size() != std::size_t(count) * rows * cols || labels.size() != count) {
        throw DimensionError("write_idx: byte counts do not match header");
    }
    std::ofstream images(images_path, std::ios::binary);
    if (!images) throw IdxError(images_path + ": cannot open for writing");
    write_u32_be(images, kImagesMagic);
    write_u32_be(images, count);
    write_u32_be(images, rows);
    write_u32_be(images, cols);
    images.write(reinterpret_cast<const char*>(pixels.data()),
                 static_cast<std::streamsize>(pixels.size()));

    std::ofstream out_labels(labels_path, std::ios::binary);
    if (!out_labels) throw IdxError(labels_path + ": cannot open for writing");
    write_u32_be(out_labels, kLabelsMagic);
    write_u32_be(out_labels, count);
    out_labels.write(reinterpret_cast<const char*>(labels.data()),
                     static_cast<std::streamsize>(labels.size()));
}

}  // namespace iwsgd::data
