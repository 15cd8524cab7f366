#include "dvrm/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dvrm/rng.hpp"

namespace dvrm {

namespace {

// glyph space: x right, y UP, both in [0,1]
// typographic zones: baseline 0.22, x-height 0.60, cap height 0.98, descender 0.02
constexpr double kBase = 0.22;
constexpr double kHalfWidth = 0.055;        // stroke half-width in glyph units
constexpr double kDeg = kPi / 180.0;
constexpr std::uint64_t kGlyphSeed = 0x676c797068ull;

struct Pt {
    double x, y;
};

struct Stroke {
    std::vector<Pt> pts; // polyline vertices
    double wfactor = 1.0;
};

Stroke S(double x1, double y1, double x2, double y2) {
    return {{{x1, y1}, {x2, y2}}, 1.0};
}

Stroke A(double cx, double cy, double rx, double ry, double deg0, double deg1) {
    Stroke s;
    const int n = 48;
    s.pts.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
        double a = (deg0 + (deg1 - deg0) * i / double(n)) * kDeg;
        s.pts.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
    }
    return s;
}

Stroke D(double x, double y) { // dot
    return {{{x, y}}, 1.6};
}

std::vector<Stroke> glyph_strokes(char c) {
    switch (c) {
        // uppercase, cap height
        case 'A': return {S(.15, .22, .50, .98), S(.50, .98, .85, .22), S(.28, .50, .72, .50)};
        case 'B': return {S(.20, .22, .20, .98), A(.20, .790, .44, .190, 90, -90), A(.20, .415, .50, .195, 90, -90)};
        case 'C': return {A(.55, .60, .38, .38, 40, 320)};
        case 'D': return {S(.20, .22, .20, .98), A(.20, .60, .55, .38, -90, 90)};
        case 'E': return {S(.20, .22, .20, .98), S(.20, .98, .80, .98), S(.20, .60, .68, .60), S(.20, .22, .80, .22)};
        case 'F': return {S(.20, .22, .20, .98), S(.20, .98, .80, .98), S(.20, .60, .68, .60)};
        case 'G': return {A(.55, .60, .38, .38, 40, 320), S(.90, .50, .58, .50), S(.90, .50, .90, .34)};
        case 'H': return {S(.20, .22, .20, .98), S(.80, .22, .80, .98), S(.20, .60, .80, .60)};
        case 'I': return {S(.50, .22, .50, .98), S(.35, .98, .65, .98), S(.35, .22, .65, .22)};
        case 'J': return {S(.45, .98, .85, .98), S(.65, .98, .65, .42), A(.475, .42, .175, .20, 0, -180)};
        case 'K': return {S(.20, .22, .20, .98), S(.20, .55, .78, .98), S(.44, .68, .80, .22)};
        case 'L': return {S(.25, .98, .25, .22), S(.25, .22, .80, .22)};
        case 'M': return {S(.15, .22, .15, .98), S(.15, .98, .50, .45), S(.50, .45, .85, .98), S(.85, .98, .85, .22)};
        case 'N': return {S(.20, .22, .20, .98), S(.20, .98, .80, .22), S(.80, .22, .80, .98)};
        case 'O': return {A(.50, .60, .36, .38, 0, 360)};
        case 'P': return {S(.20, .22, .20, .98), A(.20, .785, .44, .195, 90, -90)};
        case 'Q': return {A(.50, .60, .36, .38, 0, 360), S(.58, .44, .86, .18)};
        case 'R': return {S(.20, .22, .20, .98), A(.20, .785, .44, .195, 90, -90), S(.36, .59, .82, .22)};
        case 'S': return {A(.52, .79, .30, .19, 65, 270), A(.48, .41, .30, .19, 90, -115)};
        case 'T': return {S(.15, .98, .85, .98), S(.50, .98, .50, .22)};
        case 'U': return {S(.20, .98, .20, .46), A(.50, .46, .30, .24, 180, 360), S(.80, .46, .80, .98)};
        case 'V': return {S(.15, .98, .50, .22), S(.50, .22, .85, .98)};
        case 'W': return {S(.12, .98, .30, .22), S(.30, .22, .50, .68), S(.50, .68, .70, .22), S(.70, .22, .88, .98)};
        case 'X': return {S(.18, .98, .82, .22), S(.82, .98, .18, .22)};
        case 'Y': return {S(.15, .98, .50, .58), S(.85, .98, .50, .58), S(.50, .58, .50, .22)};
        case 'Z': return {S(.18, .98, .82, .98), S(.82, .98, .18, .22), S(.18, .22, .82, .22)};
        // lowercase, x-height with ascenders/descenders
        case 'a': return {A(.46, .41, .26, .20, 0, 360), S(.72, .60, .72, .22)};
        case 'b': return {S(.25, .95, .25, .22), A(.51, .41, .26, .20, 0, 360)};
        case 'c': return {A(.52, .41, .26, .20, 45, 315)};
        case 'd': return {S(.75, .95, .75, .22), A(.49, .41, .26, .20, 0, 360)};
        case 'e': return {A(.50, .41, .26, .20, 0, 315), S(.24, .41, .76, .41)};
        case 'f': return {S(.40, .22, .40, .80), A(.58, .80, .18, .15, 180, 60), S(.25, .60, .60, .60)};
        case 'g': return {A(.46, .41, .26, .19, 0, 360), S(.72, .60, .72, .16), A(.50, .16, .22, .14, 0, -180)};
        case 'h': return {S(.25, .22, .25, .95), A(.50, .44, .25, .16, 180, 0), S(.75, .44, .75, .22)};
        case 'i': return {S(.50, .22, .50, .60), D(.50, .78)};
        case 'j': return {S(.58, .60, .58, .16), A(.42, .16, .16, .14, 0, -150), D(.58, .78)};
        case 'k': return {S(.25, .22, .25, .95), S(.25, .38, .70, .60), S(.42, .465, .72, .22)};
        case 'l': return {S(.50, .22, .50, .95)};
        case 'm': return {S(.20, .22, .20, .60), A(.345, .45, .145, .15, 180, 0), S(.49, .45, .49, .22),
                          A(.635, .45, .145, .15, 180, 0), S(.78, .45, .78, .22)};
        case 'n': return {S(.25, .22, .25, .60), A(.50, .44, .25, .16, 180, 0), S(.75, .44, .75, .22)};
        case 'o': return {A(.50, .41, .26, .20, 0, 360)};
        case 'p': return {S(.27, .60, .27, .02), A(.52, .41, .25, .19, 0, 360)};
        case 'q': return {S(.73, .60, .73, .02), A(.48, .41, .25, .19, 0, 360)};
        case 'r': return {S(.30, .22, .30, .60), A(.50, .44, .20, .16, 180, 40)};
        case 's': return {A(.51, .500, .21, .105, 60, 270), A(.49, .315, .21, .105, 90, -115)};
        case 't': return {S(.45, .85, .45, .30), A(.58, .30, .13, .08, 180, 300), S(.28, .60, .66, .60)};
        case 'u': return {S(.25, .60, .25, .36), A(.475, .36, .225, .14, 180, 360), S(.70, .60, .70, .22)};
        case 'v': return {S(.22, .60, .50, .22), S(.50, .22, .78, .60)};
        case 'w': return {S(.17, .60, .32, .22), S(.32, .22, .50, .50), S(.50, .50, .68, .22), S(.68, .22, .83, .60)};
        case 'x': return {S(.25, .60, .75, .22), S(.75, .60, .25, .22)};
        case 'y': return {S(.25, .60, .50, .22), S(.75, .60, .40, .02)};
        case 'z': return {S(.27, .60, .73, .60), S(.73, .60, .27, .22), S(.27, .22, .73, .22)};
        // digits, cap height
        case '0': return {A(.50, .60, .30, .38, 0, 360)};
        case '1': return {S(.35, .80, .52, .98), S(.52, .98, .52, .22), S(.35, .22, .69, .22)};
        case '2': return {A(.50, .77, .28, .20, 170, -20), S(.763, .702, .22, .22), S(.22, .22, .80, .22)};
        case '3': return {A(.48, .785, .27, .195, 150, -90), A(.48, .405, .27, .195, 90, -150)};
        case '4': return {S(.62, .22, .62, .98), S(.62, .98, .20, .46), S(.20, .46, .82, .46)};
        case '5': return {S(.72, .98, .28, .98), S(.28, .98, .27, .60), A(.47, .43, .27, .22, 140, -115)};
        case '6': return {A(.62, .62, .40, .36, 80, 188), A(.50, .41, .27, .20, 0, 360)};
        case '7': return {S(.20, .98, .80, .98), S(.80, .98, .42, .22), S(.36, .60, .66, .60)};
        case '8': return {A(.50, .785, .24, .185, 0, 360), A(.50, .405, .28, .19, 0, 360)};
        case '9': return {A(.50, .79, .27, .19, 0, 360), A(.38, .58, .40, .36, 8, -100)};
        default: break;
    }
    throw ParamError(std::string("unknown glyph character '") + c + "'");
}

double dist_to_polyline(double px, double py, const std::vector<Pt>& pts) {
    double best = 1e30;
    if (pts.size() == 1) {
        double dx = px - pts[0].x, dy = py - pts[0].y;
        return std::sqrt(dx * dx + dy * dy);
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double ax = pts[i].x, ay = pts[i].y;
        double bx = pts[i + 1].x, by = pts[i + 1].y;
        double vx = bx - ax, vy = by - ay;
        double len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
        best = std::min(best, dx * dx + dy * dy);
    }
    return std::sqrt(best);
}

} // namespace

char glyph_char(std::size_t class_id) {
    if (class_id < 26) return char('A' + class_id);
    if (class_id < 52) return char('a' + (class_id - 26));
    if (class_id < 62) return char('0' + (class_id - 52));
    throw ParamError("glyph class id " + std::to_string(class_id) + " out of range [0,62)");
}

std::size_t glyph_class(char c) {
    if (c >= 'A' && c <= 'Z') return std::size_t(c - 'A');
    if (c >= 'a' && c <= 'z') return 26 + std::size_t(c - 'a');
    if (c >= '0' && c <= '9') return 52 + std::size_t(c - '0');
    throw ParamError(std::string("unknown glyph character '") + c + "'");
}

Image render_glyph(const GlyphSpec& spec) {
    std::size_t cls = glyph_class(spec.character);
    if (spec.font_variant < 0 || std::size_t(spec.font_variant) >= kGlyphVariants)
        throw ParamError("font_variant " + std::to_string(spec.font_variant) +
                         " out of range [0," + std::to_string(kGlyphVariants) + ")");

    // each variant is a fixed perturbation of the canonical strokes
    Rng vr(derive_seed(kGlyphSeed, Stream::glyph_variant,
                       cls * kGlyphVariants + std::size_t(spec.font_variant)));
    double slant = vr.uniform(-0.035, 0.035) + spec.jitter.slant;
    double wscale = vr.uniform(0.965, 1.035) * spec.jitter.scale;
    double hscale = vr.uniform(0.98, 1.02) * spec.jitter.scale;
    double dx = vr.uniform(-0.01, 0.01) + spec.jitter.dx;
    double dy = vr.uniform(-0.008, 0.008) + spec.jitter.dy;
    double wgain = vr.uniform(0.98, 1.08) * spec.jitter.width_gain;

    auto strokes = glyph_strokes(spec.character);
    const double side = double(kGlyphSide);
    for (auto& s : strokes)
        for (auto& p : s.pts) {
            double xs = p.x + slant * (p.y - kBase);
            xs = 0.5 + (xs - 0.5) * wscale;
            double ys = 0.6 + (p.y - 0.6) * hscale;
            p.x = (xs + dx) * side;
            p.y = (1.0 - (ys + dy)) * side; // to pixel coords, y now DOWN
        }

    struct Box {
        double x0, y0, x1, y1;
    };
    std::vector<Box> boxes;
    for (const auto& s : strokes) {
        Box b{1e30, 1e30, -1e30, -1e30};
        for (const auto& p : s.pts) {
            b.x0 = std::min(b.x0, p.x);
            b.y0 = std::min(b.y0, p.y);
            b.x1 = std::max(b.x1, p.x);
            b.y1 = std::max(b.y1, p.y);
        }
        double m = kHalfWidth * side * wgain * s.wfactor + 1.0;
        boxes.push_back({b.x0 - m, b.y0 - m, b.x1 + m, b.y1 + m});
    }

    Image im(kGlyphSide, kGlyphSide);
    for (std::size_t i = 0; i < kGlyphSide; ++i)
        for (std::size_t j = 0; j < kGlyphSide; ++j) {
            double px = double(j) + 0.5, py = double(i) + 0.5;
            double v = 0.0;
            for (std::size_t s = 0; s < strokes.size(); ++s) {
                const auto& bb = boxes[s];
                if (px < bb.x0 || px > bb.x1 || py < bb.y0 || py > bb.y1) continue;
                double t = kHalfWidth * side * wgain * strokes[s].wfactor;
                double d = dist_to_polyline(px, py, strokes[s].pts);
                v = std::max(v, std::clamp(t - d + 0.5, 0.0, 1.0));
            }
            im.at(i, j) = v;
        }
    return im;
}

} // namespace dvrm
