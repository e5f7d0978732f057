#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/IterativeSolvers>

#ifdef DCQ_HAVE_LAPACKE
#include <lapacke.h>
#endif

#include "errors.hpp"

namespace dcq {

using CMat = Eigen::MatrixXcd;

// Dense LU that prefers LAPACK when linked in.
class DenseLU {
public:
    DenseLU() = default;
    explicit DenseLU(CMat a) { factor(std::move(a)); }

    void factor(CMat a)
    {
        if (a.rows() != a.cols()) throw NumericalError("LU of a non-square matrix");
        n_ = static_cast<int>(a.rows());
#ifdef DCQ_HAVE_LAPACKE
        lu_ = std::move(a);
        piv_.resize(n_);
        lapack_int info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, n_, n_, reinterpret_cast<lapack_complex_double*>(lu_.data()),
                                         n_, piv_.data());
        if (info != 0) throw NumericalError("zgetrf failed with info " + std::to_string(info));
#else
        eig_.compute(a);
#endif
    }

    Eigen::MatrixXcd solve(const Eigen::MatrixXcd& b) const
    {
#ifdef DCQ_HAVE_LAPACKE
        Eigen::MatrixXcd x = b;
        lapack_int info =
            LAPACKE_zgetrs(LAPACK_COL_MAJOR, 'N', n_, static_cast<lapack_int>(x.cols()),
                           reinterpret_cast<const lapack_complex_double*>(lu_.data()), n_, piv_.data(),
                           reinterpret_cast<lapack_complex_double*>(x.data()), n_);
        if (info != 0) throw NumericalError("zgetrs failed with info " + std::to_string(info));
        return x;
#else
        return eig_.solve(b);
#endif
    }

    static const char* backend()
    {
#ifdef DCQ_HAVE_LAPACKE
        return "lapacke";
#else
        return "eigen";
#endif
    }

private:
    int n_ = 0;
#ifdef DCQ_HAVE_LAPACKE
    CMat lu_;
    std::vector<lapack_int> piv_;
#else
    Eigen::PartialPivLU<CMat> eig_;
#endif
};

struct IterativeInfo {
    int iterations = 0;
    double residual = 0;
};

// Restarted GMRES on a dense matrix with a Jacobi preconditioner.
inline Eigen::VectorXcd gmres_solve(const CMat& a, const Eigen::VectorXcd& b, double tol, int max_iter, int restart,
                                    IterativeInfo* info = nullptr)
{
    Eigen::GMRES<CMat, Eigen::DiagonalPreconditioner<std::complex<double>>> g;
    g.setTolerance(tol);
    g.setMaxIterations(max_iter);
    g.set_restart(restart);
    g.compute(a);
    Eigen::VectorXcd x = g.solve(b);
    if (info) {
        info->iterations = static_cast<int>(g.iterations());
        info->residual = g.error();
    }
    if (g.info() != Eigen::Success)
        throw NumericalError("GMRES did not converge: residual " + std::to_string(g.error()) + " after " +
                             std::to_string(g.iterations()) + " iterations");
    return x;
}

} // namespace dcq
