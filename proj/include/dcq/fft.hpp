#pragma once

#include <complex>
#include <mutex>

#include <Eigen/Dense>
#include <fftw3.h>

namespace dcq::fft {

inline std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

// In-place unnormalized DFT along the columns index of `data` (one sequence per row):
//   sign = +1: out_l = sum_n in_n e^{+2 pi i n l / L}
//   sign = -1: out_n = sum_l in_l e^{-2 pi i n l / L}
inline void transform_rows(Eigen::MatrixXcd& data, int sign)
{
    const int rows = static_cast<int>(data.rows());
    const int L = static_cast<int>(data.cols());
    if (rows == 0 || L <= 1) return;
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(planner_mutex());
        plan = fftw_plan_many_dft(1, &L, rows, p, nullptr, rows, 1, p, nullptr, rows, 1,
                                  sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lk(planner_mutex());
    fftw_destroy_plan(plan);
}

} // namespace dcq::fft
