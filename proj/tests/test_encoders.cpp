#include <doctest.h>

#include <cmath>

#include "outfit/encoders.hpp"
#include "outfit/error.hpp"
#include "outfit/kernels.hpp"
#include "support.hpp"

using namespace outfit;

namespace {

Image random_image(Rng& rng, int res) {
  Image img(res, res);
  for (auto& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

// Straight-loop forward pass of the reference CNN written from its
// documented architecture, reading weights through collect().
Vector cnn_oracle(ReferenceCnn& cnn, const Image& img) {
  std::vector<Param*> p;
  cnn.collect(p);
  const auto& cfg = cnn.config();
  int h = img.height, w = img.width, ch = 3;
  std::vector<double> x(img.data.begin(), img.data.end());
  auto at = [](const std::vector<double>& t, int c, int y, int xx, int hh, int ww) {
    return t[(static_cast<std::size_t>(c) * hh + y) * ww + xx];
  };
  for (int l = 0; l < 3; ++l) {
    const Matrix& W = p[2 * l]->value;
    const Matrix& b = p[2 * l + 1]->value;
    const int stride = l == 0 ? cfg.first_stride : 1;
    const int oc = cfg.channels[l];
    const int oh = (h + 2 - 3) / stride + 1, ow = (w + 2 - 3) / stride + 1;
    std::vector<double> y(static_cast<std::size_t>(oc) * oh * ow);
    for (int o = 0; o < oc; ++o) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          double s = b(o, 0);
          for (int c = 0; c < ch; ++c) {
            for (int dy = 0; dy < 3; ++dy) {
              for (int dx = 0; dx < 3; ++dx) {
                const int yy = i * stride - 1 + dy, xx = j * stride - 1 + dx;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                s += W(o, c * 9 + dy * 3 + dx) * at(x, c, yy, xx, h, w);
              }
            }
          }
          y[(static_cast<std::size_t>(o) * oh + i) * ow + j] = std::max(s, 0.0);
        }
      }
    }
    ch = oc;
    h = oh;
    w = ow;
    if (l < 2) {
      std::vector<double> pooled(static_cast<std::size_t>(ch) * (h / 2) * (w / 2));
      for (int c = 0; c < ch; ++c) {
        for (int i = 0; i < h / 2; ++i) {
          for (int j = 0; j < w / 2; ++j) {
            pooled[(static_cast<std::size_t>(c) * (h / 2) + i) * (w / 2) + j] =
                0.25 * (at(y, c, 2 * i, 2 * j, h, w) + at(y, c, 2 * i + 1, 2 * j, h, w) +
                        at(y, c, 2 * i, 2 * j + 1, h, w) + at(y, c, 2 * i + 1, 2 * j + 1, h, w));
          }
        }
      }
      h /= 2;
      w /= 2;
      x = std::move(pooled);
    } else {
      x = std::move(y);
    }
  }
  Vector g(ch);
  for (int c = 0; c < ch; ++c) {
    double s = 0;
    for (int i = 0; i < h * w; ++i) s += x[static_cast<std::size_t>(c) * h * w + i];
    g[c] = s / (h * w);
  }
  const Matrix& Wp = p[6]->value;
  const Matrix& bp = p[7]->value;
  return Wp * g + Vector(bp.col(0));
}

std::size_t count(std::vector<Param*> params) {
  std::size_t n = 0;
  for (const Param* p : params) n += static_cast<std::size_t>(p->size());
  return n;
}

}  // namespace

TEST_CASE("reference CNN matches an independent forward pass") {
  ReferenceCnnConfig cfg;
  cfg.resolution = 16;
  cfg.channels = {4, 6, 8};
  cfg.feature_dim = 10;
  for (int stride : {1, 2}) {
    cfg.first_stride = stride;
    ReferenceCnn cnn(cfg);
    cnn.init(42);
    // Non-zero biases so the oracle also checks their placement.
    Rng brng(9);
    std::vector<Param*> p;
    cnn.collect(p);
    for (Param* q : p) {
      if (q->name.find("bias") != std::string::npos) {
        for (Eigen::Index i = 0; i < q->size(); ++i) q->value.data()[i] = 0.1 * brng.normal();
      }
    }
    Rng rng(42);
    const Image a = random_image(rng, 16), b = random_image(rng, 16);
    const Image* batch[] = {&a, &b};
    const Batch f = cnn.forward(batch);
    REQUIRE(f.rows() == 10);
    REQUIRE(f.cols() == 2);
    CHECK((f.col(0) - cnn_oracle(cnn, a)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.col(1) - cnn_oracle(cnn, b)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cnn.encode(a) - f.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("reference backbones") {
  ReferenceCnnConfig icfg;
  icfg.resolution = 16;
  HashedTextConfig tcfg;
  tcfg.buckets = 64;
  tcfg.hidden = 12;
  tcfg.feature_dim = 10;
  icfg.feature_dim = 10;

  SUBCASE("seeded initialization is reproducible") {
    auto a = reference_backbones(0, icfg, tcfg);
    auto b = reference_backbones(0, icfg, tcfg);
    std::vector<Param*> pa, pb;
    a.image->collect(pa);
    a.text->collect(pa);
    b.image->collect(pb);
    b.text->collect(pb);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  }

  SUBCASE("parameter counts match the closed form") {
    auto bb = reference_backbones(1, icfg, tcfg);
    std::vector<Param*> pi, pt;
    bb.image->collect(pi);
    bb.text->collect(pt);
    // Hand count: conv 3->8, 8->16, 16->32 (3x3, with bias), linear 32->10.
    CHECK(count(pi) == 8 * 28 + 16 * 73 + 32 * 145 + 10 * 33);
    CHECK(count(pi) == ReferenceCnn::parameter_count(icfg));
    // Linear 64->12 and 12->10.
    CHECK(count(pt) == 12 * 65 + 10 * 13);
    CHECK(count(pt) == HashedTextEncoder::parameter_count(tcfg));
  }

  SUBCASE("batch dimension is preserved and outputs are deterministic") {
    auto bb = reference_backbones(3, icfg, tcfg);
    Rng rng(3);
    std::vector<Image> imgs;
    for (int i = 0; i < 5; ++i) imgs.push_back(random_image(rng, 16));
    std::vector<const Image*> ptrs;
    for (const auto& im : imgs) ptrs.push_back(&im);
    const Batch f1 = bb.image->forward(ptrs);
    const Batch f2 = bb.image->forward(ptrs);
    CHECK(f1.cols() == 5);
    CHECK(f1.rows() == 10);
    CHECK(f1 == f2);
    CHECK(f1.allFinite());
    const std::vector<std::string> texts = {"red dress", "", "red dress", "Black Leather boots"};
    const Batch t = bb.text->forward(texts);
    CHECK(t.cols() == 4);
    CHECK(t.allFinite());
    CHECK(t.col(0) == t.col(2));
    CHECK(t.col(1).allFinite());
  }

  SUBCASE("wrong resolution is a shape error") {
    auto bb = reference_backbones(3, icfg, tcfg);
    Image img(8, 8);
    try {
      bb.image->encode(img);
      FAIL("no error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kShape);
    }
  }

  SUBCASE("zero image through a zero projection is zero") {
    ReferenceCnn cnn(icfg);
    cnn.init(5);
    std::vector<Param*> p;
    cnn.collect(p);
    p[6]->value.setZero();
    p[7]->value.setZero();
    CHECK(cnn.encode(Image(16, 16)).isZero(0.0));
  }
}

TEST_CASE("tokenizer and hashed bag of words") {
  CHECK(tokenize("Red-Floral  summer_dress!") == std::vector<std::string>{"red", "floral", "summer", "dress"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  ,; ").empty());
  const std::vector<std::string> texts = {"a b a", ""};
  const SparseBatch x = bag_of_words(texts, 16);
  const Eigen::MatrixXd d(x);
  CHECK(d.col(0).norm() == doctest::Approx(1.0));
  CHECK(d.col(1).norm() == doctest::Approx(1.0));
  CHECK(d(token_bucket("a", 16), 0) == doctest::Approx(2.0 / std::sqrt(5.0)));
  CHECK(d(token_bucket("<empty>", 16), 1) == doctest::Approx(1.0));
  // FNV-1a 64 of "a" is 0xaf63dc4c8601ec8c.
  CHECK(token_bucket("a", 1 << 30) == static_cast<std::uint32_t>(0xaf63dc4c8601ec8cULL % (1ULL << 30)));
}

TEST_CASE("fast kernels agree with the serial reference") {
  Rng rng(17);
  for (int stride : {1, 2}) {
    kernels::ConvShape s{3, 5, 12, 12, 3, stride, 1};
    const int batch = 3;
    std::vector<double> in(s.in_size() * batch);
    for (auto& v : in) v = rng.normal();
    Matrix w(s.out_channels, s.patch()), b(s.out_channels, 1);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    std::vector<double> fast(s.out_size() * batch), ref(s.out_size() * batch);
    kernels::conv2d_forward(s, batch, in, w, b, fast);
    kernels::reference::conv2d_forward(s, batch, in, w, b, ref);
    for (std::size_t i = 0; i < fast.size(); ++i) REQUIRE(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    std::vector<double> dout(s.out_size() * batch);
    for (auto& v : dout) v = rng.normal();
    Matrix dw1 = Matrix::Zero(w.rows(), w.cols()), db1 = Matrix::Zero(b.rows(), 1);
    Matrix dw2 = dw1, db2 = db1;
    std::vector<double> din1(in.size()), din2(in.size());
    kernels::conv2d_backward(s, batch, in, w, dout, dw1, db1, din1);
    kernels::reference::conv2d_backward(s, batch, in, w, dout, dw2, db2, din2);
    CHECK((dw1 - dw2).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((db1 - db2).cwiseAbs().maxCoeff() < 1e-10);
    double worst = 0;
    for (std::size_t i = 0; i < din1.size(); ++i) worst = std::max(worst, std::fabs(din1[i] - din2[i]));
    CHECK(worst < 1e-10);
  }

  std::vector<double> in(2 * 3 * 8 * 8);
  for (auto& v : in) v = rng.normal();
  std::vector<double> a(in.size() / 4), b(in.size() / 4);
  kernels::avg_pool2_forward(3, 8, 8, 2, in, a);
  kernels::reference::avg_pool2_forward(3, 8, 8, 2, in, b);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));

  const Batch pts = testing::random_batch(rng, 7, 300);
  const Vector q = testing::random_vector(rng, 7);
  const Vector d1 = kernels::column_distances(pts, q);
  const Vector d2 = kernels::reference::column_distances(pts, q);
  CHECK((d1 - d2).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(d1[5] == doctest::Approx((pts.col(5) - q).norm()).epsilon(1e-14));
}
