#include <catch2/catch_amalgamated.hpp>

#include "spectag/image.hpp"
#include "spectag/phantom.hpp"

using namespace spectag;

namespace {

PhantomSpec two_class_spec() {
    PhantomSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.classes = {{"a", {0.2, 0.3, 0.4, 0.5, 0.5, 0.4, 0.3, 0.2}, 0.0, 8.0},
                    {"b", {0.6, 0.6, 0.5, 0.4, 0.3, 0.3, 0.6, 0.7}, 0.0, 8.0}};
    spec.noise_sigma = 0.0;
    spec.specular_discs = 0;
    spec.seed = 42;
    return spec;
}

} // namespace

TEST_CASE("phantom with zero noise and texture reproduces class spectra exactly") {
    PhantomSpec spec = two_class_spec();
    spec.dark_level = 0.0;
    spec.white_level = 1.0;
    const PhantomImage img = generate_phantom(spec);
    const ChannelStack sr = normalize_reflectance(img.raw, img.calibration);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const int cls = img.truth.at(x, y);
            for (int c = 0; c < 8; ++c)
                REQUIRE(sr.channels[c].at(x, y) == spec.classes[cls].spectrum[c]);
        }
}

TEST_CASE("phantom generation is deterministic in spec and seed") {
    PhantomSpec spec = two_class_spec();
    spec.noise_sigma = 0.02;
    spec.classes[0].texture_amplitude = 0.1;
    spec.specular_discs = 2;
    const PhantomImage a = generate_phantom(spec);
    const PhantomImage b = generate_phantom(spec);
    REQUIRE(a.truth.labels == b.truth.labels);
    for (int c = 0; c < 8; ++c) REQUIRE(a.raw.channels[c].values == b.raw.channels[c].values);

    spec.seed = 43;
    const PhantomImage other = generate_phantom(spec);
    REQUIRE(a.raw.channels[0].values != other.raw.channels[0].values);
}

TEST_CASE("phantom rejects inconsistent spectra lengths") {
    PhantomSpec spec = two_class_spec();
    spec.classes[1].spectrum.pop_back();
    REQUIRE_THROWS_AS(generate_phantom(spec), DataError);
}

TEST_CASE("phantom ground truth labels stay in range and cover all stripes") {
    PhantomSpec spec = two_class_spec();
    spec.stripe_classes = {1, 0};
    spec.stripe_bounds = {0.5};
    const PhantomImage img = generate_phantom(spec);
    for (int y = 0; y < spec.height; ++y) {
        REQUIRE(img.truth.at(0, y) == 1);
        REQUIRE(img.truth.at(spec.width - 1, y) == 0);
    }
}

TEST_CASE("specular discs saturate and are caught by the V threshold") {
    PhantomSpec spec = two_class_spec();
    spec.specular_discs = 3;
    spec.specular_radius = 4.0;
    const PhantomImage img = generate_phantom(spec);
    const ChannelStack sr = normalize_reflectance(img.raw, img.calibration);
    const PixelMask mask = mask_specular(sr, rgb_band_indices(sr), 0.95);
    REQUIRE(mask.count() > 0);
    // every saturated pixel is masked
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (img.raw.channels[0].at(x, y) == 1.0) REQUIRE(mask.masked(x, y));
}
