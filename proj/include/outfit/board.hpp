#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "outfit/image.hpp"

namespace outfit {

struct BoardLayout {
  int tile = 128;
  int padding = 8;
  int text_scale = 2;
};

/// Tiles in the given order on a white strip with the caption underneath.
/// The caption uses a built-in 5x7 font (upper-cased; unknown glyphs blank).
Image render_board(std::span<const Image* const> tiles, const std::string& caption, const BoardLayout& layout = {});

void write_board(const std::filesystem::path& path, std::span<const Image* const> tiles, const std::string& caption,
                 const BoardLayout& layout = {});

}  // namespace outfit
