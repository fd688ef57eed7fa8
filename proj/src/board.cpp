#include "outfit/board.hpp"

#include <array>
#include <cctype>
#include <cstdint>

#include "outfit/error.hpp"

namespace outfit {

namespace {

using Glyph = std::array<std::uint8_t, 7>;

const Glyph* glyph(char c) {
  static const Glyph letters[26] = {
      {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
      {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E},
      {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
      {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
      {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
      {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
      {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
      {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
      {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
      {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
      {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
      {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},
  };
  static const Glyph digits[10] = {
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
  };
  static const Glyph dash = {0, 0, 0, 0x1F, 0, 0, 0};
  static const Glyph dot = {0, 0, 0, 0, 0, 0x0C, 0x0C};
  static const Glyph comma = {0, 0, 0, 0, 0x0C, 0x04, 0x08};
  static const Glyph quote = {0x04, 0x04, 0, 0, 0, 0, 0};
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u >= 'A' && u <= 'Z') return &letters[u - 'A'];
  if (u >= '0' && u <= '9') return &digits[u - '0'];
  switch (u) {
    case '-': return &dash;
    case '.': return &dot;
    case ',': return &comma;
    case '\'': return &quote;
    default: return nullptr;
  }
}

void fill(Image& img, int x0, int y0, int w, int h, float v) {
  for (int c = 0; c < 3; ++c)
    for (int y = y0; y < y0 + h && y < img.height; ++y)
      for (int x = x0; x < x0 + w && x < img.width; ++x) img.at(c, y, x) = v;
}

}  // namespace

Image render_board(std::span<const Image* const> tiles, const std::string& caption, const BoardLayout& layout) {
  if (tiles.empty()) throw Error(ErrorKind::kConfig, "a board needs at least one item");
  const int n = static_cast<int>(tiles.size());
  const int T = layout.tile, P = layout.padding, S = layout.text_scale;
  const int text_h = 7 * S;
  Image board(n * (T + P) + P, T + 3 * P + text_h);
  std::fill(board.data.begin(), board.data.end(), 1.0f);
  for (int i = 0; i < n; ++i) {
    const Image tile = resize_bilinear(*tiles[static_cast<std::size_t>(i)], T, T);
    const int x0 = P + i * (T + P);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < T; ++y)
        for (int x = 0; x < T; ++x) board.at(c, P + y, x0 + x) = tile.at(c, y, x);
  }
  const int advance = 6 * S;
  const int max_chars = (board.width - 2 * P) / advance;
  const int y0 = 2 * P + T;
  for (int i = 0; i < static_cast<int>(caption.size()) && i < max_chars; ++i) {
    const Glyph* g = glyph(caption[static_cast<std::size_t>(i)]);
    if (g == nullptr) continue;
    for (int row = 0; row < 7; ++row)
      for (int col = 0; col < 5; ++col)
        if (((*g)[static_cast<std::size_t>(row)] >> (4 - col)) & 1) fill(board, P + i * advance + col * S, y0 + row * S, S, S, 0.0f);
  }
  return board;
}

void write_board(const std::filesystem::path& path, std::span<const Image* const> tiles, const std::string& caption,
                 const BoardLayout& layout) {
  write_png(path, render_board(tiles, caption, layout));
}

}  // namespace outfit
