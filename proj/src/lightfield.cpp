#include "bdff/lightfield.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bdff/parallel.hpp"
#include "bdff/png_io.hpp"

namespace bdff::lf {

void LightField::validate() const {
  if (u_count < 1 || v_count < 1 || views.empty()) {
    throw ConfigError("light field: empty angular grid");
  }
  if (views.size() != static_cast<size_t>(u_count) * v_count) {
    throw ConfigError("light field: expected " + std::to_string(u_count * v_count) +
                      " views, got " + std::to_string(views.size()));
  }
  for (const auto& v : views) {
    if (v.c != views[0].c || v.h != views[0].h || v.w != views[0].w) {
      throw ShapeError("light field: sub-aperture image extents differ");
    }
  }
}

namespace {

float sample_bilinear(const ImageF& img, int c, double y, double x) {
  // edge clamp
  x = std::clamp(x, 0.0, static_cast<double>(img.w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.h - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.w - 1), y1 = std::min(y0 + 1, img.h - 1);
  const double fx = x - x0, fy = y - y0;
  return static_cast<float>((1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
                            fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1)));
}

}  // namespace

ImageF shift_and_add(const LightField& lf, double slope_px) {
  lf.validate();
  if (!std::isfinite(slope_px)) throw DomainError("shift_and_add: slope must be finite");
  const ImageF& first = lf.views[0];
  const double u0 = (lf.u_count - 1) / 2.0;
  const double v0 = (lf.v_count - 1) / 2.0;
  ImageF out(first.c, first.h, first.w);
  const double norm = 1.0 / (lf.u_count * lf.v_count);
  parallel_for(first.h, static_cast<int64_t>(first.h) * first.w * lf.views.size() * 8,
               [&](int64_t y) {
    for (int v = 0; v < lf.v_count; ++v) {
      for (int u = 0; u < lf.u_count; ++u) {
        const ImageF& img = lf.view(u, v);
        const double dx = slope_px * (u - u0);
        const double dy = slope_px * (v - v0);
        for (int c = 0; c < first.c; ++c) {
          float* row = &out.plane(c)[y * first.w];
          for (int x = 0; x < first.w; ++x) {
            row[x] += static_cast<float>(norm * sample_bilinear(img, c, y + dy, x + dx));
          }
        }
      }
    }
  });
  return out;
}

optics::FocalStack refocus_stack_from_lf(const LightField& lf,
                                         const std::vector<double>& slopes_px) {
  if (slopes_px.empty()) throw ConfigError("refocus_stack_from_lf: no slopes given");
  if (!std::is_sorted(slopes_px.begin(), slopes_px.end())) {
    throw ConfigError("refocus_stack_from_lf: slopes must be ordered");
  }
  optics::FocalStack stack;
  stack.focus_depths_mm = slopes_px;  // slope takes the role of the focus parameter
  stack.max_coc_px = 0.0;
  for (double s : slopes_px) stack.slices.push_back(shift_and_add(lf, s));
  return stack;
}

std::vector<ImageF> focus_measure_maps(const optics::FocalStack& stack) {
  if (stack.slices.size() < 2) {
    throw UsageError("focus measure: need at least 2 slices, got " +
                     std::to_string(stack.slices.size()));
  }
  const int h = stack.slices[0].h, w = stack.slices[0].w;
  std::vector<ImageF> maps;
  maps.reserve(stack.slices.size());
  for (const ImageF& slice : stack.slices) {
    const ImageF gray = grayscale(slice);
    // modified Laplacian, replicated border
    ImageF ml(1, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float c = gray.at(0, y, x);
        const float xl = gray.at(0, y, std::max(x - 1, 0));
        const float xr = gray.at(0, y, std::min(x + 1, w - 1));
        const float yu = gray.at(0, std::max(y - 1, 0), x);
        const float yd = gray.at(0, std::min(y + 1, h - 1), x);
        ml.at(0, y, x) = std::fabs(2 * c - xl - xr) + std::fabs(2 * c - yu - yd);
      }
    }
    // 9x9 box aggregation via integral image
    std::vector<double> integral(static_cast<size_t>(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y) {
      double rowsum = 0.0;
      for (int x = 0; x < w; ++x) {
        rowsum += ml.at(0, y, x);
        integral[static_cast<size_t>(y + 1) * (w + 1) + (x + 1)] =
            integral[static_cast<size_t>(y) * (w + 1) + (x + 1)] + rowsum;
      }
    }
    ImageF sml(1, h, w);
    const int r = 4;
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(y - r, 0), y1 = std::min(y + r, h - 1);
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(x - r, 0), x1 = std::min(x + r, w - 1);
        const double s = integral[static_cast<size_t>(y1 + 1) * (w + 1) + (x1 + 1)] -
                         integral[static_cast<size_t>(y0) * (w + 1) + (x1 + 1)] -
                         integral[static_cast<size_t>(y1 + 1) * (w + 1) + x0] +
                         integral[static_cast<size_t>(y0) * (w + 1) + x0];
        sml.at(0, y, x) = static_cast<float>(s);
      }
    }
    maps.push_back(std::move(sml));
  }
  return maps;
}

DffResult classical_dff(const optics::FocalStack& stack) {
  const auto maps = focus_measure_maps(stack);
  const int h = maps[0].h, w = maps[0].w;
  DffResult out;
  out.layer_index = ImageF(1, h, w);
  out.confidence = ImageF(1, h, w);
  for (int64_t i = 0; i < maps[0].pixels(); ++i) {
    float best = -1.0f, second = -1.0f;
    int best_idx = 0;
    for (size_t s = 0; s < maps.size(); ++s) {
      const float v = maps[s].v[i];
      if (v > best) {
        second = best;
        best = v;
        best_idx = static_cast<int>(s);
      } else if (v > second) {
        second = v;
      }
    }
    out.layer_index.v[i] = static_cast<float>(best_idx);
    out.confidence.v[i] = best > 0.0f ? (best - std::max(second, 0.0f)) / best : 0.0f;
  }
  return out;
}

LightField load_light_field(const std::string& descriptor_path) {
  namespace fs = std::filesystem;
  std::ifstream is(descriptor_path);
  if (!is) throw IoError("cannot open light-field descriptor " + descriptor_path);
  nlohmann::json j = nlohmann::json::parse(is);
  LightField lf;
  lf.u_count = j.at("u_count").get<int>();
  lf.v_count = j.at("v_count").get<int>();
  const std::string pattern = j.at("pattern").get<std::string>();
  const fs::path dir = fs::path(descriptor_path).parent_path();
  for (int v = 0; v < lf.v_count; ++v) {
    for (int u = 0; u < lf.u_count; ++u) {
      char name[256];
      std::snprintf(name, sizeof(name), pattern.c_str(), v, u);
      lf.views.push_back(read_png_float((dir / name).string()));
    }
  }
  lf.validate();
  return lf;
}

}  // namespace bdff::lf
