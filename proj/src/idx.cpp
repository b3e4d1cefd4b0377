// IDX (MNIST-format) ingestion.

#include <cstdint>
#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <vector>

#include "preqinfo/datakit.hpp"
#include "preqinfo/error.hpp"

namespace preqinfo {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t at, const std::filesystem::path& path) {
  if (buf.size() < at + 4) throw ParseError(ParseError::Kind::Truncated, path.string() + ": truncated header");
  return (std::uint32_t{buf[at]} << 24) | (std::uint32_t{buf[at + 1]} << 16) | (std::uint32_t{buf[at + 2]} << 8) |
         std::uint32_t{buf[at + 3]};
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);

  const auto img_magic = be32(img, 0, images);
  if (img_magic != kImageMagic) throw ParseError(ParseError::Kind::BadMagic, images.string() + ": bad image magic");
  const auto lab_magic = be32(lab, 0, labels);
  if (lab_magic != kLabelMagic) throw ParseError(ParseError::Kind::BadMagic, labels.string() + ": bad label magic");

  const std::size_t count = be32(img, 4, images);
  const std::size_t rows = be32(img, 8, images);
  const std::size_t cols = be32(img, 12, images);
  const std::size_t label_count = be32(lab, 4, labels);
  if (count != label_count) {
    throw ParseError(ParseError::Kind::CountMismatch,
                     "image count " + std::to_string(count) + " != label count " + std::to_string(label_count));
  }
  const std::size_t pixels = rows * cols;
  if (img.size() < 16 + count * pixels) throw ParseError(ParseError::Kind::Truncated, images.string() + ": truncated");
  if (lab.size() < 8 + count) throw ParseError(ParseError::Kind::Truncated, labels.string() + ": truncated");

  LabeledDataset data;
  data.kind = InputKind::Dense;
  data.inputs = Matrix(count, pixels);
  data.labels.resize(count);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t p = 0; p < pixels; ++p) data.inputs(i, p) = img[16 + i * pixels + p] / 255.0;
    data.labels[i] = lab[8 + i];
    max_label = std::max<std::size_t>(max_label, lab[8 + i]);
  }
  data.num_classes = count == 0 ? 0 : max_label + 1;
  data.order.resize(count);
  std::iota(data.order.begin(), data.order.end(), std::size_t{0});
  data.meta = {{"generator", "idx"}, {"images", images.string()}, {"labels", labels.string()},
               {"rows", rows},       {"cols", cols}};
  return data;
}

}  // namespace preqinfo
