// Independent reference implementations used only by tests. These stay
// deliberately naive: exact rational arithmetic for agreement statistics
// and answer equality, plain normal equations for least squares.
#pragma once

#include <array>
#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracles {

struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d = 1) : num(n), den(d) {
        if (den == 0) throw std::invalid_argument("zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    static Rational checked(__int128 n, __int128 d) {
        if (d == 0) throw std::invalid_argument("zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        __int128 a = n < 0 ? -n : n, b = d;
        while (b != 0) {
            const __int128 t = a % b;
            a = b;
            b = t;
        }
        if (a > 1) {
            n /= a;
            d /= a;
        }
        constexpr __int128 lim = 9223372036854775807LL;
        if (n > lim || n < -lim || d > lim) {
            throw std::overflow_error("rational overflow");
        }
        Rational r;
        r.num = static_cast<long long>(n);
        r.den = static_cast<long long>(d);
        return r;
    }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return checked(static_cast<__int128>(a.num) * b.den +
                           static_cast<__int128>(b.num) * a.den,
                       static_cast<__int128>(a.den) * b.den);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return checked(static_cast<__int128>(a.num) * b.den -
                           static_cast<__int128>(b.num) * a.den,
                       static_cast<__int128>(a.den) * b.den);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return checked(static_cast<__int128>(a.num) * b.num,
                       static_cast<__int128>(a.den) * b.den);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num == 0) throw std::invalid_argument("division by zero");
        return checked(static_cast<__int128>(a.num) * b.den,
                       static_cast<__int128>(a.den) * b.num);
    }
    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num == b.num && a.den == b.den;
    }

    double to_double() const {
        return static_cast<double>(num) / static_cast<double>(den);
    }
};

struct ExactKappa {
    Rational kappa;
    Rational p_bar;
    Rational p_e;
    bool degenerate = false;
};

/// Direct transcription of the agreement statistic: rows are complete
/// problems with {correct, incorrect} counts over n raters.
inline ExactKappa fleiss_kappa_exact(const std::vector<std::array<long long, 2>>& rows,
                                     long long n) {
    if (rows.size() < 2 || n < 2) throw std::invalid_argument("need N>=2, n>=2");
    const auto N = static_cast<long long>(rows.size());

    Rational p_bar(0);
    long long sum_correct = 0, sum_incorrect = 0;
    for (const auto& row : rows) {
        const long long c = row[0], i = row[1];
        assert(c + i == n);
        p_bar = p_bar + Rational(c * (c - 1) + i * (i - 1), n * (n - 1));
        sum_correct += c;
        sum_incorrect += i;
    }
    p_bar = p_bar / Rational(N);

    const Rational p_c(sum_correct, N * n);
    const Rational p_i(sum_incorrect, N * n);
    const Rational p_e = p_c * p_c + p_i * p_i;

    ExactKappa out;
    out.p_bar = p_bar;
    out.p_e = p_e;
    if (p_e == Rational(1)) {
        out.degenerate = true;
        out.kappa = Rational(1);
    } else {
        out.kappa = (p_bar - p_e) / (Rational(1) - p_e);
    }
    return out;
}

/// Least-squares polynomial fit through the normal equations, solved by
/// Gaussian elimination with partial pivoting in long double.
inline std::vector<double> polyfit_normal_equations(
    const std::vector<std::pair<double, double>>& points, int degree) {
    const int m = degree + 1;
    std::vector<std::vector<long double>> ata(m, std::vector<long double>(m, 0.0L));
    std::vector<long double> atb(m, 0.0L);
    for (const auto& [x, y] : points) {
        std::vector<long double> powers(2 * m - 1, 1.0L);
        for (int p = 1; p < 2 * m - 1; ++p) powers[p] = powers[p - 1] * x;
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < m; ++c) ata[r][c] += powers[r + c];
            atb[r] += powers[r] * y;
        }
    }
    for (int col = 0; col < m; ++col) {
        int pivot = col;
        for (int r = col + 1; r < m; ++r) {
            if (std::abs(ata[r][col]) > std::abs(ata[pivot][col])) pivot = r;
        }
        std::swap(ata[col], ata[pivot]);
        std::swap(atb[col], atb[pivot]);
        if (ata[col][col] == 0.0L) throw std::runtime_error("singular system");
        for (int r = col + 1; r < m; ++r) {
            const long double f = ata[r][col] / ata[col][col];
            for (int c = col; c < m; ++c) ata[r][c] -= f * ata[col][c];
            atb[r] -= f * atb[col];
        }
    }
    std::vector<double> coeffs(m, 0.0);
    for (int r = m - 1; r >= 0; --r) {
        long double sum = atb[r];
        for (int c = r + 1; c < m; ++c) sum -= ata[r][c] * coeffs[c];
        coeffs[r] = static_cast<double>(sum / ata[r][r]);
    }
    return coeffs;
}

} // namespace oracles
