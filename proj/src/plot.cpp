#include "sa2d/plot.hpp"

#include <algorithm>
#include <cmath>

#include "sa2d/png_io.hpp"

namespace sa2d {

namespace {

struct Canvas {
    int h, w;
    std::vector<unsigned char> rgb;

    Canvas(int height, int width) : h(height), w(width), rgb(std::size_t(height) * width * 3, 255) {}

    void set(int i, int j, unsigned char r, unsigned char g, unsigned char b) {
        if (i < 0 || i >= h || j < 0 || j >= w) return;
        const std::size_t at = (static_cast<std::size_t>(i) * w + j) * 3;
        rgb[at] = r;
        rgb[at + 1] = g;
        rgb[at + 2] = b;
    }

    void line(int i0, int j0, int i1, int j1, unsigned char r, unsigned char g, unsigned char b) {
        const int di = std::abs(i1 - i0), dj = std::abs(j1 - j0);
        const int si = i0 < i1 ? 1 : -1, sj = j0 < j1 ? 1 : -1;
        int err = (dj > di ? dj : -di) / 2;
        while (true) {
            set(i0, j0, r, g, b);
            if (i0 == i1 && j0 == j1) break;
            const int e = err;
            if (e > -dj) {
                err -= di;
                j0 += sj;
            }
            if (e < di) {
                err += dj;
                i0 += si;
            }
        }
    }
};

}  // namespace

void plot_score_curve(const ScoreSeries& series, const std::optional<FrameAnnotation>& annotation,
                      const std::filesystem::path& path) {
    const int n = static_cast<int>(series.scores.size());
    if (n == 0) throw Error(ErrorKind::EmptyInput, "empty score series");

    const int margin_left = 30, margin_bottom = 18, margin_top = 8, margin_right = 8;
    const int plot_w = std::max(2 * n, 240);
    const int width = margin_left + plot_w + margin_right;
    const int height = 160;
    const int plot_h = height - margin_top - margin_bottom;
    Canvas canvas(height, width);

    auto x_of = [&](int idx) {
        return margin_left + (n == 1 ? plot_w / 2 : idx * (plot_w - 1) / (n - 1));
    };
    auto y_of = [&](double score) {
        return margin_top + static_cast<int>(std::lround((1.0 - score) * (plot_h - 1)));
    };

    // anomaly spans from the annotation, aligned to scored frames
    if (annotation) {
        for (int idx = 0; idx < n; ++idx) {
            const int frame = series.first_scored_frame + idx;
            if (frame <= static_cast<int>(annotation->size()) &&
                (*annotation)[static_cast<std::size_t>(frame) - 1] == 1) {
                const int x0 = x_of(idx), x1 = x_of(std::min(idx + 1, n - 1));
                for (int x = x0; x <= x1; ++x)
                    for (int y = margin_top; y < margin_top + plot_h; ++y)
                        canvas.set(y, x, 255, 214, 214);
            }
        }
    }

    // frame
    canvas.line(margin_top, margin_left, margin_top + plot_h - 1, margin_left, 0, 0, 0);
    canvas.line(margin_top + plot_h - 1, margin_left, margin_top + plot_h - 1,
                margin_left + plot_w - 1, 0, 0, 0);

    // threshold line
    const int ty = y_of(series.threshold);
    for (int x = margin_left; x < margin_left + plot_w; x += 4) canvas.set(ty, x, 150, 150, 150);

    // score polyline
    for (int idx = 0; idx + 1 < n; ++idx)
        canvas.line(y_of(series.scores[static_cast<std::size_t>(idx)]), x_of(idx),
                    y_of(series.scores[static_cast<std::size_t>(idx) + 1]), x_of(idx + 1), 30, 60,
                    160);
    if (n == 1) canvas.set(y_of(series.scores[0]), x_of(0), 30, 60, 160);

    write_png_rgb(path, canvas.h, canvas.w, canvas.rgb);
}

}  // namespace sa2d
