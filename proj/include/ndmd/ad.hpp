#pragma once

#include <memory>
#include <vector>

#include "ndmd/dense.hpp"
#include "ndmd/numerics.hpp"

namespace ndmd::ad {

/// Handle into a Tape node. Valid only for the tape that produced it.
struct Var {
  int id = -1;
  bool ok() const { return id >= 0; }
};

/// Complex quantity carried as a (re, im) pair of real nodes.
struct CVar {
  Var re, im;
};

/// Reverse-mode tape over dense real matrices. Complex steps are either
/// composites of real ops (so their adjoints come for free) or dedicated
/// primitives where differentiating through the algorithm would be wasteful:
/// the least-squares projection, the deflation projector, and the modal
/// propagator exp(omega * t).
///
/// One backward() per tape: the pass consumes it.
class Tape {
 public:
  Var constant(RealMat v);
  /// Differentiable leaf; read its gradient after backward().
  Var leaf(RealMat v);
  Var stop_gradient(Var x);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var hadamard(Var a, Var b);
  Var matmul(Var a, Var b);
  /// y = x*w + broadcast(b); x is batch-rows, b is 1 x out.
  Var affine(Var x, Var w, Var b);
  Var sin_act(Var x, double omega);
  Var elu_act(Var x);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var x, int j0, int j1);
  Var transpose(Var x);
  /// Sum of squares of all entries, a 1x1 node.
  Var sumsq(Var x);

  CVar cpair(Var re, Var im) { return {re, im}; }
  CVar cconstant(const DenseMatrix& v);
  CVar cadd(CVar a, CVar b);
  CVar csub(CVar a, CVar b);
  CVar cmatmul(CVar a, CVar b);
  CVar chadamard(CVar a, CVar b);
  CVar cconj(CVar a);
  CVar cconcat_cols(CVar a, CVar b);
  CVar cstop_gradient(CVar x);
  /// sumsq(re) + sumsq(im): squared Frobenius norm of a complex quantity.
  Var csumsq(CVar x);

  /// z = argmin ||A z - b||_F. Gradient comes from the implicit-function
  /// rule on the normal equations, not from differentiating the factorization.
  CVar complex_lstsq(CVar a, CVar b);

  /// y = (I - F (F^H F)^{-1} F^H) x. F is frozen: it receives no gradient,
  /// and the projector itself (Hermitian, idempotent) is the adjoint.
  CVar deflate(CVar f, CVar x);

  /// E[p, j] = exp(omega_p * t_j) for a column of complex rates.
  CVar modal_evolve(CVar omega, std::vector<double> times);

  const RealMat& value(Var v) const;
  DenseMatrix cvalue(CVar v) const;

  /// Seeds d(root)/d(root) = 1 and sweeps in reverse. Root must be 1x1.
  /// A second call on the same tape throws.
  void backward(Var root);
  /// Gradient at a leaf; exact zeros if the leaf never reached the root.
  RealMat grad(Var leaf) const;

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Const,
    Leaf,
    StopGrad,
    Add,
    Sub,
    Scale,
    Hadamard,
    Matmul,
    Affine,
    SinAct,
    EluAct,
    ConcatCols,
    Transpose,
    SliceCols,
    Sumsq,
    LstsqRe,
    LstsqIm,
    DeflateRe,
    DeflateIm,
    EvolveRe,
    EvolveIm,
  };

  /// Shared payload for the complex primitives (one per lstsq/deflate/evolve
  /// call; the re and im nodes of the result both point at it).
  struct CplxPayload {
    std::unique_ptr<QrPivoted> qr;
    DenseMatrix a, z, r;           // lstsq: operand, solution, residual
    std::vector<double> times;     // evolve
    DenseMatrix evolved;           // evolve: E
    int seen = 0;
    int in_re[2] = {-1, -1};
    int in_im[2] = {-1, -1};
    int out_re = -1, out_im = -1;
  };

  struct Node {
    Op op;
    int a = -1, b = -1, c = -1;
    double s = 0.0;
    int j0 = 0, j1 = 0;
    RealMat val;
    RealMat aux;  // op-specific forward cache (e.g. cos for sine layers)
    RealMat grad;
    bool needs_grad = false;
    std::shared_ptr<CplxPayload> payload;
  };

  Var push(Node n);
  void accum(int id, const RealMat& g);
  void backward_cplx(int id);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace ndmd::ad
