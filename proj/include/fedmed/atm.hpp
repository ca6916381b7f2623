#ifndef FEDMED_ATM_HPP
#define FEDMED_ATM_HPP

#include <array>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fedmed/image.hpp"
#include "fedmed/rng.hpp"

// Affine transform module: labeled multi-view augmentation feeding the
// discriminator's auxiliary heads.

namespace fedmed {

/// The fixed class alphabets for the three auxiliary tasks.
struct AtmClassSets {
    static constexpr std::array<double, 4> rotations{0.0, 90.0, 180.0, 270.0};
    static constexpr std::array<std::pair<double, double>, 4> translations{
        std::pair{-30.0, -30.0}, std::pair{-30.0, 30.0}, std::pair{30.0, -30.0},
        std::pair{30.0, 30.0}};
    static constexpr std::array<double, 3> scales{0.9, 1.1, 1.2};
};

enum class TransformKind { rotation, translation, scaling };
enum class ViewSource { real, fake };

struct View {
    Slice2D image;
    TransformKind kind;
    int class_label;
};

struct ViewBatch {
    std::vector<View> views; // k rotation views, then k translation, then k scale
    int k = 0;
    ViewSource source = ViewSource::real;
};

namespace atm_detail {

// Uniform class indices: without replacement when k <= n, else k iid draws.
inline std::vector<int> sample_labels(int n, int k, Rng& rng) {
    std::vector<int> labels;
    labels.reserve(k);
    if (k <= n) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i) {
            const int j = i + rng.below_int(n - i);
            std::swap(pool[i], pool[j]);
            labels.push_back(pool[i]);
        }
    } else {
        for (int i = 0; i < k; ++i) labels.push_back(rng.below_int(n));
    }
    return labels;
}

} // namespace atm_detail

/// Draw k labeled views per transform type (3k views total). Rotations and
/// translations use exact nearest-neighbor transforms; scales use bilinear.
/// Label draw order: rotations, then translations, then scales.
inline ViewBatch atm_sample_views(const Slice2D& img, int k, Rng& rng,
                                  ViewSource source = ViewSource::real) {
    if (k != 1 && k != 2 && k != 4)
        throw std::invalid_argument("atm_sample_views: k must be 1, 2 or 4, got " +
                                    std::to_string(k));
    const double fill = img.value_range().lo;
    const auto nearest = InterpSpec::nearest_fill(fill);
    const auto bilinear = InterpSpec::bilinear_fill(fill);

    ViewBatch batch;
    batch.k = k;
    batch.source = source;
    batch.views.reserve(3 * static_cast<std::size_t>(k));

    for (int lab : atm_detail::sample_labels(4, k, rng))
        batch.views.push_back({rotate(img, AtmClassSets::rotations[lab], nearest),
                               TransformKind::rotation, lab});
    for (int lab : atm_detail::sample_labels(4, k, rng)) {
        const auto [dx, dy] = AtmClassSets::translations[lab];
        batch.views.push_back({translate(img, dx, dy, nearest), TransformKind::translation, lab});
    }
    for (int lab : atm_detail::sample_labels(3, k, rng))
        batch.views.push_back(
            {rescale(img, AtmClassSets::scales[lab], bilinear), TransformKind::scaling, lab});
    return batch;
}

} // namespace fedmed

#endif // FEDMED_ATM_HPP
