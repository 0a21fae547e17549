#include "sattn/relpos.hpp"

namespace sattn {

RelPosEncoder::RelPosEncoder(Index dim, long max_clip, double base) : dim_(dim), max_clip_(max_clip), base_(base) {
  if (dim <= 0 || dim % 2 != 0) throw ContractError("RelPosEncoder: dim must be positive and even, got " + std::to_string(dim));
  if (max_clip <= 0) throw ContractError("RelPosEncoder: max clip offset must be positive");
  if (base <= 0.0) throw ContractError("RelPosEncoder: base wavelength must be positive");
}

Vector RelPosEncoder::encode_1d(long offset) const { return sinusoid_1d<double>(clip(offset), dim_, base_); }

Vector RelPosEncoder::encode_2d(long dx, long dy) const {
  if (dim_ % 4 != 0) throw ContractError("encode_2d: dim must be divisible by 4, got " + std::to_string(dim_));
  Vector out(dim_);
  out.head(dim_ / 2) = sinusoid_1d<double>(clip(dx), dim_ / 2, base_);
  out.tail(dim_ / 2) = sinusoid_1d<double>(clip(dy), dim_ / 2, base_);
  return out;
}

namespace {

void require_same_kind(const Layout& queries, const Layout& keys) {
  if (queries.kind != keys.kind) throw ContractError("offset table: query and key layouts differ in kind");
}

}  // namespace

Index offset_count(const Layout& queries, const Layout& keys) {
  require_same_kind(queries, keys);
  return (queries.width + keys.width - 1) * (queries.height + keys.height - 1);
}

OffsetTable build_offset_table(const Layout& queries, const Layout& keys, const RelPosEncoder& encoder) {
  require_same_kind(queries, keys);
  const bool grid = queries.kind == Layout::Kind::kGrid;
  const Index span_x = queries.width + keys.width - 1;
  const Index span_y = queries.height + keys.height - 1;

  OffsetTable table;
  table.encodings.resize(span_x * span_y, encoder.dim());
  for (Index oy = 0; oy < span_y; ++oy) {
    for (Index ox = 0; ox < span_x; ++ox) {
      const long dx = static_cast<long>(ox - (queries.width - 1));
      const long dy = static_cast<long>(oy - (queries.height - 1));
      table.encodings.row(oy * span_x + ox) =
          (grid ? encoder.encode_2d(dx, dy) : encoder.encode_1d(dx)).transpose();
    }
  }
  table.index.resize(queries.count(), keys.count());
  for (Index q = 0; q < queries.count(); ++q) {
    for (Index k = 0; k < keys.count(); ++k) {
      const Index ox = keys.x_of(k) - queries.x_of(q) + (queries.width - 1);
      const Index oy = keys.y_of(k) - queries.y_of(q) + (queries.height - 1);
      table.index(q, k) = oy * span_x + ox;
    }
  }
  return table;
}

}  // namespace sattn
