#pragma once

#include <cstddef>

#include "dvrm/common.hpp"
#include "dvrm/image.hpp"

namespace dvrm {

inline constexpr std::size_t kGlyphClasses = 62;  // A-Z, a-z, 0-9
inline constexpr std::size_t kGlyphVariants = 50;
inline constexpr std::size_t kGlyphSide = 28;

char glyph_char(std::size_t class_id);
std::size_t glyph_class(char c);

// extra affine perturbation applied ON TOP of the variant's own parameters
struct GlyphJitter {
    double slant = 0.0;      // shear, x += slant * (y - baseline)
    double scale = 1.0;      // isotropic, about the glyph box center
    double dx = 0.0, dy = 0.0;
    double width_gain = 1.0; // stroke thickness multiplier
};

struct GlyphSpec {
    char character = 'A';
    int font_variant = 0; // [0, kGlyphVariants)
    GlyphJitter jitter;
};

// deterministic 28x28 anti-aliased render from the embedded stroke table
Image render_glyph(const GlyphSpec& spec);

} // namespace dvrm
