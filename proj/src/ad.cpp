#include "ndmd/ad.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ndmd/errors.hpp"
#include "ndmd/kernels.hpp"

namespace ndmd::ad {

namespace {

void check_same_shape(const RealMat& a, const RealMat& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                     " vs " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
}

}  // namespace

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const RealMat& Tape::value(Var v) const { return nodes_.at(v.id).val; }

DenseMatrix Tape::cvalue(CVar v) const {
  return DenseMatrix::from_parts(value(v.re), value(v.im));
}

Var Tape::constant(RealMat v) {
  Node n;
  n.op = Op::Const;
  n.val = std::move(v);
  return push(std::move(n));
}

Var Tape::leaf(RealMat v) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(v);
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::stop_gradient(Var x) {
  Node n;
  n.op = Op::StopGrad;
  n.a = x.id;
  n.val = value(x);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Node n;
  n.op = Op::Add;
  n.a = a.id;
  n.b = b.id;
  n.val = value(a);
  kernels::axpy(static_cast<int>(n.val.size()), 1.0, value(b).data(), n.val.data());
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  Node n;
  n.op = Op::Sub;
  n.a = a.id;
  n.b = b.id;
  n.val = value(a);
  kernels::axpy(static_cast<int>(n.val.size()), -1.0, value(b).data(), n.val.data());
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::Scale;
  n.a = a.id;
  n.s = s;
  n.val = value(a);
  kernels::scale(static_cast<int>(n.val.size()), s, n.val.data());
  n.needs_grad = nodes_[a.id].needs_grad;
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  check_same_shape(value(a), value(b), "hadamard");
  Node n;
  n.op = Op::Hadamard;
  n.a = a.id;
  n.b = b.id;
  n.val = value(a);
  const RealMat& bv = value(b);
  for (size_t i = 0; i < n.val.v.size(); ++i) n.val.v[i] *= bv.v[i];
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const RealMat& av = value(a);
  const RealMat& bv = value(b);
  if (av.cols != bv.rows) throw ShapeError("matmul: inner dimension mismatch");
  Node n;
  n.op = Op::Matmul;
  n.a = a.id;
  n.b = b.id;
  n.val = RealMat(av.rows, bv.cols);
  kernels::gemm(false, false, av.rows, bv.cols, av.cols, 1.0, av.data(), av.cols,
                bv.data(), bv.cols, 0.0, n.val.data(), bv.cols);
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(n));
}

Var Tape::affine(Var x, Var w, Var b) {
  const RealMat& xv = value(x);
  const RealMat& wv = value(w);
  const RealMat& bv = value(b);
  if (xv.cols != wv.rows || bv.rows != 1 || bv.cols != wv.cols)
    throw ShapeError("affine: shape mismatch");
  Node n;
  n.op = Op::Affine;
  n.a = x.id;
  n.b = w.id;
  n.c = b.id;
  n.val = RealMat(xv.rows, wv.cols);
  for (int i = 0; i < xv.rows; ++i)
    std::copy(bv.v.begin(), bv.v.end(),
              n.val.v.begin() + static_cast<size_t>(i) * wv.cols);
  kernels::gemm(false, false, xv.rows, wv.cols, xv.cols, 1.0, xv.data(), xv.cols,
                wv.data(), wv.cols, 1.0, n.val.data(), wv.cols);
  n.needs_grad = nodes_[x.id].needs_grad || nodes_[w.id].needs_grad ||
                 nodes_[b.id].needs_grad;
  return push(std::move(n));
}

Var Tape::sin_act(Var x, double omega) {
  const RealMat& xv = value(x);
  Node n;
  n.op = Op::SinAct;
  n.a = x.id;
  n.s = omega;
  n.val = RealMat(xv.rows, xv.cols);
  n.aux = RealMat(xv.rows, xv.cols);  // cos(omega x), reused by the adjoint
  RealMat scaled = xv;
  kernels::scale(static_cast<int>(scaled.size()), omega, scaled.data());
  kernels::sincos(static_cast<int>(scaled.size()), scaled.data(), n.val.data(),
                  n.aux.data());
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

Var Tape::elu_act(Var x) {
  const RealMat& xv = value(x);
  Node n;
  n.op = Op::EluAct;
  n.a = x.id;
  n.val = RealMat(xv.rows, xv.cols);
  kernels::elu(static_cast<int>(xv.size()), xv.data(), n.val.data());
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

Var Tape::concat_cols(Var a, Var b) {
  const RealMat& av = value(a);
  const RealMat& bv = value(b);
  if (av.rows != bv.rows) throw ShapeError("concat_cols: row mismatch");
  Node n;
  n.op = Op::ConcatCols;
  n.a = a.id;
  n.b = b.id;
  n.j0 = av.cols;
  n.val = RealMat(av.rows, av.cols + bv.cols);
  for (int i = 0; i < av.rows; ++i) {
    for (int j = 0; j < av.cols; ++j) n.val(i, j) = av(i, j);
    for (int j = 0; j < bv.cols; ++j) n.val(i, av.cols + j) = bv(i, j);
  }
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(n));
}

Var Tape::slice_cols(Var x, int j0, int j1) {
  const RealMat& xv = value(x);
  if (j0 < 0 || j1 > xv.cols || j0 >= j1) throw ShapeError("slice_cols: bad range");
  Node n;
  n.op = Op::SliceCols;
  n.a = x.id;
  n.j0 = j0;
  n.j1 = j1;
  n.val = RealMat(xv.rows, j1 - j0);
  for (int i = 0; i < xv.rows; ++i)
    for (int j = j0; j < j1; ++j) n.val(i, j - j0) = xv(i, j);
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

Var Tape::transpose(Var x) {
  const RealMat& xv = value(x);
  Node n;
  n.op = Op::Transpose;
  n.a = x.id;
  n.val = RealMat(xv.cols, xv.rows);
  for (int i = 0; i < xv.rows; ++i)
    for (int j = 0; j < xv.cols; ++j) n.val(j, i) = xv(i, j);
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

Var Tape::sumsq(Var x) {
  const RealMat& xv = value(x);
  Node n;
  n.op = Op::Sumsq;
  n.a = x.id;
  n.val = RealMat(1, 1);
  n.val(0, 0) = kernels::sumsq(static_cast<int>(xv.size()), xv.data());
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

// ---- complex composites ------------------------------------------------------

CVar Tape::cconstant(const DenseMatrix& v) {
  return {constant(v.real_part()), constant(v.imag_part())};
}

CVar Tape::cadd(CVar a, CVar b) { return {add(a.re, b.re), add(a.im, b.im)}; }

CVar Tape::csub(CVar a, CVar b) { return {sub(a.re, b.re), sub(a.im, b.im)}; }

CVar Tape::cmatmul(CVar a, CVar b) {
  // (ar + i ai)(br + i bi)
  const Var rr = matmul(a.re, b.re);
  const Var ii = matmul(a.im, b.im);
  const Var ri = matmul(a.re, b.im);
  const Var ir = matmul(a.im, b.re);
  return {sub(rr, ii), add(ri, ir)};
}

CVar Tape::chadamard(CVar a, CVar b) {
  const Var rr = hadamard(a.re, b.re);
  const Var ii = hadamard(a.im, b.im);
  const Var ri = hadamard(a.re, b.im);
  const Var ir = hadamard(a.im, b.re);
  return {sub(rr, ii), add(ri, ir)};
}

CVar Tape::cconj(CVar a) { return {a.re, scale(a.im, -1.0)}; }

CVar Tape::cconcat_cols(CVar a, CVar b) {
  return {concat_cols(a.re, b.re), concat_cols(a.im, b.im)};
}

CVar Tape::cstop_gradient(CVar x) {
  return {stop_gradient(x.re), stop_gradient(x.im)};
}

Var Tape::csumsq(CVar x) { return add(sumsq(x.re), sumsq(x.im)); }

// ---- complex primitives --------------------------------------------------------

CVar Tape::complex_lstsq(CVar a, CVar b) {
  const DenseMatrix am = cvalue(a);
  const DenseMatrix bm = cvalue(b);
  auto payload = std::make_shared<CplxPayload>();
  payload->qr = std::make_unique<QrPivoted>(am);
  payload->a = am;
  payload->z = payload->qr->solve(bm);
  payload->r = bm - ndmd::matmul(am, payload->z);
  payload->in_re[0] = a.re.id;
  payload->in_im[0] = a.im.id;
  payload->in_re[1] = b.re.id;
  payload->in_im[1] = b.im.id;

  const bool ng = nodes_[a.re.id].needs_grad || nodes_[a.im.id].needs_grad ||
                  nodes_[b.re.id].needs_grad || nodes_[b.im.id].needs_grad;
  Node nre;
  nre.op = Op::LstsqRe;
  nre.val = payload->z.real_part();
  nre.payload = payload;
  nre.needs_grad = ng;
  const Var vre = push(std::move(nre));
  Node nim;
  nim.op = Op::LstsqIm;
  nim.val = payload->z.imag_part();
  nim.payload = payload;
  nim.needs_grad = ng;
  const Var vim = push(std::move(nim));
  payload->out_re = vre.id;
  payload->out_im = vim.id;
  return {vre, vim};
}

CVar Tape::deflate(CVar f, CVar x) {
  const DenseMatrix fm = cvalue(f);
  const DenseMatrix xm = cvalue(x);
  auto payload = std::make_shared<CplxPayload>();
  payload->qr = std::make_unique<QrPivoted>(fm);
  payload->a = fm;
  const DenseMatrix y = xm - ndmd::matmul(fm, payload->qr->solve(xm));
  payload->in_re[0] = x.re.id;
  payload->in_im[0] = x.im.id;

  const bool ng = nodes_[x.re.id].needs_grad || nodes_[x.im.id].needs_grad;
  Node nre;
  nre.op = Op::DeflateRe;
  nre.val = y.real_part();
  nre.payload = payload;
  nre.needs_grad = ng;
  const Var vre = push(std::move(nre));
  Node nim;
  nim.op = Op::DeflateIm;
  nim.val = y.imag_part();
  nim.payload = payload;
  nim.needs_grad = ng;
  const Var vim = push(std::move(nim));
  payload->out_re = vre.id;
  payload->out_im = vim.id;
  return {vre, vim};
}

CVar Tape::modal_evolve(CVar omega, std::vector<double> times) {
  const RealMat& alo = value(omega.re);
  const RealMat& blo = value(omega.im);
  if (alo.cols != 1 || blo.cols != 1)
    throw ShapeError("modal_evolve: omega must be a column");
  const int p = alo.rows;
  const int tn = static_cast<int>(times.size());

  auto payload = std::make_shared<CplxPayload>();
  payload->times = std::move(times);
  payload->in_re[0] = omega.re.id;
  payload->in_im[0] = omega.im.id;

  DenseMatrix e(p, tn);
  for (int q = 0; q < p; ++q)
    for (int j = 0; j < tn; ++j) {
      const double t = payload->times[j];
      e(q, j) = std::exp(alo(q, 0) * t) *
                cplx(std::cos(blo(q, 0) * t), std::sin(blo(q, 0) * t));
    }
  payload->evolved = e;

  const bool ng = nodes_[omega.re.id].needs_grad || nodes_[omega.im.id].needs_grad;
  Node nre;
  nre.op = Op::EvolveRe;
  nre.val = e.real_part();
  nre.payload = payload;
  nre.needs_grad = ng;
  const Var vre = push(std::move(nre));
  Node nim;
  nim.op = Op::EvolveIm;
  nim.val = e.imag_part();
  nim.payload = payload;
  nim.needs_grad = ng;
  const Var vim = push(std::move(nim));
  payload->out_re = vre.id;
  payload->out_im = vim.id;
  return {vre, vim};
}

// ---- backward ------------------------------------------------------------------

void Tape::accum(int id, const RealMat& g) {
  if (id < 0) return;
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = RealMat(n.val.rows, n.val.cols);
  kernels::axpy(static_cast<int>(g.size()), 1.0, g.data(), n.grad.data());
}

void Tape::backward(Var root) {
  if (consumed_) throw Error("tape already consumed by a previous backward pass");
  consumed_ = true;
  Node& r = nodes_.at(root.id);
  if (r.val.rows != 1 || r.val.cols != 1)
    throw ShapeError("backward: root must be scalar");
  r.grad = RealMat(1, 1);
  r.grad(0, 0) = 1.0;

  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    const bool is_payload_half =
        n.op == Op::LstsqRe || n.op == Op::LstsqIm || n.op == Op::DeflateRe ||
        n.op == Op::DeflateIm || n.op == Op::EvolveRe || n.op == Op::EvolveIm;
    if (is_payload_half) {
      if (n.needs_grad) backward_cplx(id);
      continue;
    }
    if (n.grad.size() == 0 || !n.needs_grad) continue;
    const RealMat& g = n.grad;
    switch (n.op) {
      case Op::Const:
      case Op::Leaf:
      case Op::StopGrad:
        break;
      case Op::Add:
        accum(n.a, g);
        accum(n.b, g);
        break;
      case Op::Sub: {
        accum(n.a, g);
        RealMat neg = g;
        kernels::scale(static_cast<int>(neg.size()), -1.0, neg.data());
        accum(n.b, neg);
        break;
      }
      case Op::Scale: {
        RealMat gs = g;
        kernels::scale(static_cast<int>(gs.size()), n.s, gs.data());
        accum(n.a, gs);
        break;
      }
      case Op::Hadamard: {
        RealMat ga = g;
        const RealMat& bv = nodes_[n.b].val;
        for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] *= bv.v[i];
        accum(n.a, ga);
        RealMat gb = g;
        const RealMat& av = nodes_[n.a].val;
        for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] *= av.v[i];
        accum(n.b, gb);
        break;
      }
      case Op::Matmul: {
        const RealMat& av = nodes_[n.a].val;
        const RealMat& bv = nodes_[n.b].val;
        if (nodes_[n.a].needs_grad) {
          RealMat ga(av.rows, av.cols);
          kernels::gemm(false, true, av.rows, av.cols, bv.cols, 1.0, g.data(),
                        bv.cols, bv.data(), bv.cols, 0.0, ga.data(), av.cols);
          accum(n.a, ga);
        }
        if (nodes_[n.b].needs_grad) {
          RealMat gb(bv.rows, bv.cols);
          kernels::gemm(true, false, bv.rows, bv.cols, av.rows, 1.0, av.data(),
                        av.cols, g.data(), bv.cols, 0.0, gb.data(), bv.cols);
          accum(n.b, gb);
        }
        break;
      }
      case Op::Affine: {
        const RealMat& xv = nodes_[n.a].val;
        const RealMat& wv = nodes_[n.b].val;
        if (nodes_[n.a].needs_grad) {
          RealMat gx(xv.rows, xv.cols);
          kernels::gemm(false, true, xv.rows, xv.cols, wv.cols, 1.0, g.data(),
                        wv.cols, wv.data(), wv.cols, 0.0, gx.data(), xv.cols);
          accum(n.a, gx);
        }
        if (nodes_[n.b].needs_grad) {
          RealMat gw(wv.rows, wv.cols);
          kernels::gemm(true, false, wv.rows, wv.cols, xv.rows, 1.0, xv.data(),
                        xv.cols, g.data(), wv.cols, 0.0, gw.data(), wv.cols);
          accum(n.b, gw);
        }
        if (nodes_[n.c].needs_grad) {
          RealMat gb(1, wv.cols);
          for (int i = 0; i < g.rows; ++i)
            kernels::axpy(wv.cols, 1.0, g.data() + static_cast<size_t>(i) * wv.cols,
                          gb.data());
          accum(n.c, gb);
        }
        break;
      }
      case Op::SinAct: {
        RealMat gx = g;
        for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] *= n.s * n.aux.v[i];
        accum(n.a, gx);
        break;
      }
      case Op::EluAct: {
        const RealMat& xv = nodes_[n.a].val;
        RealMat gx(xv.rows, xv.cols);
        kernels::elu_grad(static_cast<int>(xv.size()), xv.data(), g.data(),
                          gx.data());
        accum(n.a, gx);
        break;
      }
      case Op::ConcatCols: {
        const RealMat& av = nodes_[n.a].val;
        const RealMat& bv = nodes_[n.b].val;
        RealMat ga(av.rows, av.cols), gb(bv.rows, bv.cols);
        for (int i = 0; i < av.rows; ++i) {
          for (int j = 0; j < av.cols; ++j) ga(i, j) = g(i, j);
          for (int j = 0; j < bv.cols; ++j) gb(i, j) = g(i, av.cols + j);
        }
        accum(n.a, ga);
        accum(n.b, gb);
        break;
      }
      case Op::SliceCols: {
        const RealMat& xv = nodes_[n.a].val;
        RealMat gx(xv.rows, xv.cols);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gx(i, n.j0 + j) = g(i, j);
        accum(n.a, gx);
        break;
      }
      case Op::Transpose: {
        RealMat gx(g.cols, g.rows);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gx(j, i) = g(i, j);
        accum(n.a, gx);
        break;
      }
      case Op::Sumsq: {
        const RealMat& xv = nodes_[n.a].val;
        RealMat gx = xv;
        kernels::scale(static_cast<int>(gx.size()), 2.0 * g(0, 0), gx.data());
        accum(n.a, gx);
        break;
      }
      default:
        throw Error("backward: unhandled op");
    }
  }
}

void Tape::backward_cplx(int id) {
  Node& n = nodes_[id];
  auto& pl = *n.payload;
  ++pl.seen;
  if (pl.seen < 2) return;  // wait for the other half

  const Node& nre = nodes_[pl.out_re];
  const Node& nim = nodes_[pl.out_im];
  const int rows = nre.val.rows, cols = nre.val.cols;
  RealMat gre = nre.grad.size() ? nre.grad : RealMat(rows, cols);
  RealMat gim = nim.grad.size() ? nim.grad : RealMat(rows, cols);
  const DenseMatrix w = DenseMatrix::from_parts(gre, gim);

  switch (n.op) {
    case Op::LstsqRe:
    case Op::LstsqIm: {
      // z = (A^H A)^{-1} A^H b ; S = (A^H A)^{-1} W
      const DenseMatrix s = pl.qr->gram_solve(w);
      const DenseMatrix gb = ndmd::matmul(pl.a, s);
      accum(pl.in_re[1], gb.real_part());
      accum(pl.in_im[1], gb.imag_part());
      const DenseMatrix ga =
          ndmd::matmul(pl.r, s.adjoint()) -
          ndmd::matmul(pl.a, ndmd::matmul(s, pl.z.adjoint()));
      accum(pl.in_re[0], ga.real_part());
      accum(pl.in_im[0], ga.imag_part());
      break;
    }
    case Op::DeflateRe:
    case Op::DeflateIm: {
      // the projector is Hermitian and idempotent: pull the cotangent back
      // through itself; the frozen bank gets nothing
      const DenseMatrix gx = w - ndmd::matmul(pl.a, pl.qr->solve(w));
      accum(pl.in_re[0], gx.real_part());
      accum(pl.in_im[0], gx.imag_part());
      break;
    }
    case Op::EvolveRe:
    case Op::EvolveIm: {
      const int p = rows;
      RealMat galpha(p, 1), gbeta(p, 1);
      for (int q = 0; q < p; ++q) {
        double sa = 0.0, sb = 0.0;
        for (int j = 0; j < cols; ++j) {
          const double t = pl.times[j];
          const double er = pl.evolved(q, j).real();
          const double ei = pl.evolved(q, j).imag();
          sa += t * (gre(q, j) * er + gim(q, j) * ei);
          sb += t * (-gre(q, j) * ei + gim(q, j) * er);
        }
        galpha(q, 0) = sa;
        gbeta(q, 0) = sb;
      }
      accum(pl.in_re[0], galpha);
      accum(pl.in_im[0], gbeta);
      break;
    }
    default:
      throw Error("backward: unhandled complex op");
  }
}

RealMat Tape::grad(Var leaf) const {
  const Node& n = nodes_.at(leaf.id);
  if (n.grad.size() == 0) return RealMat(n.val.rows, n.val.cols);
  return n.grad;
}

}  // namespace ndmd::ad
