// Copyright 2026 The intentfuse Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "intentfuse/svg_export.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "intentfuse/error.h"
#include "intentfuse/numfmt.h"

namespace intentfuse {
namespace cli {

namespace {

constexpr int kCell = 64;        // px per attention cell
constexpr int kMarginLeft = 78;  // room for query-token labels
constexpr int kMarginTop = 58;   // title + key-token labels
constexpr int kCaption = 46;     // caption strip under the grid

void check_square(const std::vector<std::string>& tokens,
                  const Tensor& matrix) {
  const std::size_t t = tokens.size();
  if (t == 0) throw ShapeError("attention export: no tokens");
  if (matrix.rows() != t || matrix.cols() != t)
    throw ShapeError("attention export: matrix must be tokens x tokens");
}

// White at 0 through a desaturated blue at 1; attention weights live in
// [0, 1] so no normalisation is applied (uniform rows stay light).
void heat_rgb(double v, int rgb[3]) {
  const double c = std::clamp(v, 0.0, 1.0);
  const int lo[3] = {255, 255, 255};
  const int hi[3] = {33, 94, 166};
  for (int k = 0; k < 3; ++k)
    rgb[k] = static_cast<int>(std::lround(lo[k] + c * (hi[k] - lo[k])));
}

std::string num(double v) { return fmt_double(v); }

std::string caption_text(double kl_score, double mahalanobis) {
  return "kl_score=" + num(kl_score) + "; mahalanobis=" + num(mahalanobis);
}

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string attention_csv(const std::vector<std::string>& tokens,
                          const Tensor& matrix, double kl_score,
                          double mahalanobis) {
  check_square(tokens, matrix);
  const std::size_t t = tokens.size();
  std::string out;
  for (std::size_t c = 0; c < t; ++c) {
    if (c) out += ',';
    out += tokens[c];
  }
  out += '\n';
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t c = 0; c < t; ++c) {
      if (c) out += ',';
      out += num(matrix.at(r, c));
    }
    out += '\n';
  }
  out += "# caption: " + caption_text(kl_score, mahalanobis) + "\n";
  return out;
}

std::string attention_svg(const std::string& sample_id,
                          const std::vector<std::string>& tokens,
                          const Tensor& matrix, double kl_score,
                          double mahalanobis) {
  check_square(tokens, matrix);
  const int t = static_cast<int>(tokens.size());
  const int width = kMarginLeft + t * kCell + 16;
  const int height = kMarginTop + t * kCell + kCaption;

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\" viewBox=\"0 0 " + std::to_string(width) + " " +
       std::to_string(height) + "\">\n";
  s += "  <title>cross-stream attention: " + xml_escape(sample_id) +
       "</title>\n";
  s += "  <desc>" + xml_escape(caption_text(kl_score, mahalanobis)) +
       "</desc>\n";
  s += "  <rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) +
       "\" height=\"" + std::to_string(height) + "\" fill=\"white\"/>\n";
  s += "  <text x=\"" + std::to_string(kMarginLeft) +
       "\" y=\"18\" font-family=\"monospace\" font-size=\"13\">" +
       xml_escape(sample_id) + "</text>\n";

  // Key tokens across the top, query tokens down the left.
  for (int c = 0; c < t; ++c) {
    const int cx = kMarginLeft + c * kCell + kCell / 2;
    s += "  <text x=\"" + std::to_string(cx) + "\" y=\"" +
         std::to_string(kMarginTop - 10) +
         "\" text-anchor=\"middle\" font-family=\"monospace\" "
         "font-size=\"12\">" +
         xml_escape(tokens[static_cast<std::size_t>(c)]) + "</text>\n";
  }
  for (int r = 0; r < t; ++r) {
    const int cy = kMarginTop + r * kCell + kCell / 2 + 4;
    s += "  <text x=\"" + std::to_string(kMarginLeft - 8) + "\" y=\"" +
         std::to_string(cy) +
         "\" text-anchor=\"end\" font-family=\"monospace\" "
         "font-size=\"12\">" +
         xml_escape(tokens[static_cast<std::size_t>(r)]) + "</text>\n";
  }

  for (int r = 0; r < t; ++r) {
    for (int c = 0; c < t; ++c) {
      const double v =
          matrix.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
      int rgb[3];
      heat_rgb(v, rgb);
      const int x = kMarginLeft + c * kCell;
      const int y = kMarginTop + r * kCell;
      s += "  <rect x=\"" + std::to_string(x) + "\" y=\"" +
           std::to_string(y) + "\" width=\"" + std::to_string(kCell) +
           "\" height=\"" + std::to_string(kCell) + "\" fill=\"rgb(" +
           std::to_string(rgb[0]) + "," + std::to_string(rgb[1]) + "," +
           std::to_string(rgb[2]) + ")\" stroke=\"#888\"/>\n";
      const char* ink = v > 0.55 ? "white" : "black";
      s += "  <text x=\"" + std::to_string(x + kCell / 2) + "\" y=\"" +
           std::to_string(y + kCell / 2 + 4) +
           "\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"12\" fill=\"" +
           ink + "\">" + fmt_fixed(v, 3) + "</text>\n";
    }
  }

  s += "  <text x=\"" + std::to_string(kMarginLeft) + "\" y=\"" +
       std::to_string(kMarginTop + t * kCell + 28) +
       "\" font-family=\"monospace\" font-size=\"12\">" +
       xml_escape(caption_text(kl_score, mahalanobis)) + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace cli
}  // namespace intentfuse
