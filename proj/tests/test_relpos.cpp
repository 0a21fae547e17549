#include <doctest.h>

#include "sattn/errors.hpp"
#include "sattn/relpos.hpp"

using namespace sattn;

namespace {

void check_values(const Vector& got, std::initializer_list<double> want) {
  REQUIRE(got.size() == static_cast<Index>(want.size()));
  Index i = 0;
  for (double w : want) CHECK(got(i++) == doctest::Approx(w).epsilon(1e-12));
}

}  // namespace

// Expected values below were computed independently in double precision.

TEST_CASE("1-d sinusoid is interleaved sin/cos over geometric wavelengths") {
  check_values(sinusoid_1d(3, 6), {0.1411200080598672, -0.9899924966004454, 0.13879810108005056, 0.990320699135675,
                                   0.00646325907018965, 0.9999791129229608});
}

TEST_CASE("2-d code concatenates clipped x and y codes") {
  check_values(encode_2d(-2, 1, 8, 5), {-0.9092974268256817, -0.4161468365471424, -0.01999866669333308,
                                        0.9998000066665778, 0.8414709848078965, 0.5403023058681398,
                                        0.00999983333416666, 0.9999500004166653});
}

TEST_CASE("offsets beyond the clip share an encoding") {
  const RelPosEncoder enc(4, 2);
  CHECK(enc.encode_1d(7).isApprox(enc.encode_1d(2)));
  CHECK(enc.encode_1d(-9).isApprox(enc.encode_1d(-2)));
  CHECK_FALSE(enc.encode_1d(1).isApprox(enc.encode_1d(2)));
}

TEST_CASE("encoder contracts") {
  CHECK_THROWS_AS(RelPosEncoder(3, 2), ContractError);
  CHECK_THROWS_AS(RelPosEncoder(4, 0), ContractError);
  CHECK_THROWS_AS(RelPosEncoder(6, 2).encode_2d(0, 0), ContractError);
}

TEST_CASE("offset counts") {
  CHECK(offset_count(Layout::sequence(4), Layout::sequence(4)) == 7);
  CHECK(offset_count(Layout::sequence(2), Layout::sequence(3)) == 4);
  CHECK(offset_count(Layout::grid(2, 3), Layout::grid(2, 3)) == 3 * 5);
}

TEST_CASE("offset table maps each pair to the encoding of k - q") {
  const Layout l = Layout::grid(2, 3);
  const RelPosEncoder enc(8, 4);
  const OffsetTable t = build_offset_table(l, l, enc);
  CHECK(t.num_offsets() == 15);
  for (Index q = 0; q < l.count(); ++q) {
    for (Index k = 0; k < l.count(); ++k) {
      const Vector want = enc.encode_2d(l.x_of(k) - l.x_of(q), l.y_of(k) - l.y_of(q));
      const Vector got = t.encodings.row(t.index(q, k)).transpose();
      CHECK(got.isApprox(want));
    }
  }
}
