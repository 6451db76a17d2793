#pragma once

// Arbitrary-precision integers and exact rationals. The expansion
// recursions cancel heavily at high order, so an exact scalar backend is
// offered next to plain double. Schoolbook arithmetic throughout: operand
// sizes stay in the hundreds of bits at the matrix dimensions this library
// targets.

#include <cstdint>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace semimarkov {

class BigInt {
  public:
    BigInt() = default;

    BigInt(long long v) {
        if (v == 0) return;
        sign_ = v < 0 ? -1 : 1;
        // avoid UB on LLONG_MIN
        unsigned long long m =
            v < 0 ? ~static_cast<unsigned long long>(v) + 1ULL
                  : static_cast<unsigned long long>(v);
        while (m != 0) {
            limbs_.push_back(static_cast<std::uint32_t>(m & 0xffffffffULL));
            m >>= 32;
        }
    }

    static BigInt from_uint64(std::uint64_t v) {
        BigInt r;
        if (v == 0) return r;
        r.sign_ = 1;
        while (v != 0) {
            r.limbs_.push_back(static_cast<std::uint32_t>(v & 0xffffffffULL));
            v >>= 32;
        }
        return r;
    }

    bool is_zero() const { return sign_ == 0; }
    bool is_negative() const { return sign_ < 0; }
    bool is_even() const { return limbs_.empty() || (limbs_[0] & 1u) == 0; }
    int sign() const { return sign_; }

    BigInt negated() const {
        BigInt r = *this;
        r.sign_ = -r.sign_;
        return r;
    }

    BigInt abs() const {
        BigInt r = *this;
        if (r.sign_ < 0) r.sign_ = 1;
        return r;
    }

    static int compare_magnitude(const BigInt& a, const BigInt& b) {
        if (a.limbs_.size() != b.limbs_.size())
            return a.limbs_.size() < b.limbs_.size() ? -1 : 1;
        for (std::size_t i = a.limbs_.size(); i-- > 0;) {
            if (a.limbs_[i] != b.limbs_[i])
                return a.limbs_[i] < b.limbs_[i] ? -1 : 1;
        }
        return 0;
    }

    static int compare(const BigInt& a, const BigInt& b) {
        if (a.sign_ != b.sign_) return a.sign_ < b.sign_ ? -1 : 1;
        int m = compare_magnitude(a, b);
        return a.sign_ >= 0 ? m : -m;
    }

    friend bool operator==(const BigInt& a, const BigInt& b) { return compare(a, b) == 0; }
    friend bool operator!=(const BigInt& a, const BigInt& b) { return compare(a, b) != 0; }
    friend bool operator<(const BigInt& a, const BigInt& b) { return compare(a, b) < 0; }

    friend BigInt operator+(const BigInt& a, const BigInt& b) {
        if (a.sign_ == 0) return b;
        if (b.sign_ == 0) return a;
        BigInt r;
        if (a.sign_ == b.sign_) {
            r.limbs_ = add_mag(a.limbs_, b.limbs_);
            r.sign_ = a.sign_;
        } else {
            int c = compare_magnitude(a, b);
            if (c == 0) return BigInt();
            const BigInt& big = c > 0 ? a : b;
            const BigInt& small = c > 0 ? b : a;
            r.limbs_ = sub_mag(big.limbs_, small.limbs_);
            r.sign_ = big.sign_;
        }
        return r;
    }

    friend BigInt operator-(const BigInt& a, const BigInt& b) { return a + b.negated(); }

    friend BigInt operator*(const BigInt& a, const BigInt& b) {
        if (a.sign_ == 0 || b.sign_ == 0) return BigInt();
        BigInt r;
        r.limbs_.assign(a.limbs_.size() + b.limbs_.size(), 0);
        for (std::size_t i = 0; i < a.limbs_.size(); ++i) {
            std::uint64_t carry = 0;
            for (std::size_t j = 0; j < b.limbs_.size(); ++j) {
                std::uint64_t cur = static_cast<std::uint64_t>(a.limbs_[i]) * b.limbs_[j] +
                                    r.limbs_[i + j] + carry;
                r.limbs_[i + j] = static_cast<std::uint32_t>(cur & 0xffffffffULL);
                carry = cur >> 32;
            }
            std::size_t k = i + b.limbs_.size();
            while (carry != 0) {
                std::uint64_t cur = r.limbs_[k] + carry;
                r.limbs_[k] = static_cast<std::uint32_t>(cur & 0xffffffffULL);
                carry = cur >> 32;
                ++k;
            }
        }
        r.trim();
        r.sign_ = a.sign_ * b.sign_;
        return r;
    }

    BigInt shifted_left(unsigned bits) const {
        if (sign_ == 0 || bits == 0) return *this;
        BigInt r;
        unsigned words = bits / 32, rem = bits % 32;
        r.limbs_.assign(limbs_.size() + words + 1, 0);
        for (std::size_t i = 0; i < limbs_.size(); ++i) {
            std::uint64_t v = static_cast<std::uint64_t>(limbs_[i]) << rem;
            r.limbs_[i + words] |= static_cast<std::uint32_t>(v & 0xffffffffULL);
            r.limbs_[i + words + 1] |= static_cast<std::uint32_t>(v >> 32);
        }
        r.trim();
        r.sign_ = sign_;
        return r;
    }

    BigInt shifted_right(unsigned bits) const {
        if (sign_ == 0) return *this;
        unsigned words = bits / 32, rem = bits % 32;
        if (words >= limbs_.size()) return BigInt();
        BigInt r;
        r.limbs_.assign(limbs_.size() - words, 0);
        for (std::size_t i = 0; i < r.limbs_.size(); ++i) {
            std::uint64_t v = limbs_[i + words] >> rem;
            if (rem != 0 && i + words + 1 < limbs_.size())
                v |= static_cast<std::uint64_t>(limbs_[i + words + 1]) << (32 - rem);
            r.limbs_[i] = static_cast<std::uint32_t>(v);
        }
        r.trim();
        r.sign_ = r.limbs_.empty() ? 0 : sign_;
        return r;
    }

    // magnitude divmod: |a| = q*|b| + r with 0 <= r < |b|; signs ignored
    static void divmod_magnitude(const BigInt& a, const BigInt& b, BigInt& q, BigInt& r) {
        if (b.sign_ == 0) throw std::domain_error("BigInt division by zero");
        q = BigInt();
        r = BigInt();
        if (compare_magnitude(a, b) < 0) {
            r = a.abs();
            return;
        }
        if (a.bit_length() <= 64 && b.bit_length() <= 64) {
            std::uint64_t ua = a.to_uint64_mag(), ub = b.to_uint64_mag();
            q = BigInt::from_uint64(ua / ub);
            r = BigInt::from_uint64(ua % ub);
            return;
        }
        int nbits = static_cast<int>(a.bit_length());
        BigInt babs = b.abs();
        q.limbs_.assign(static_cast<std::size_t>(nbits + 31) / 32, 0);
        for (int i = nbits - 1; i >= 0; --i) {
            r = r.shifted_left(1);
            if (a.bit(static_cast<unsigned>(i))) r = r + BigInt(1);
            if (compare_magnitude(r, babs) >= 0) {
                r = r - babs;
                q.limbs_[static_cast<std::size_t>(i) / 32] |= 1u << (i % 32);
            }
        }
        q.trim();
        if (!q.limbs_.empty()) q.sign_ = 1;
        if (!r.limbs_.empty()) r.sign_ = 1;
    }

    // binary (Stein) gcd of magnitudes; Euclid with full division is too
    // slow once coefficients reach a few hundred bits
    static BigInt gcd(BigInt a, BigInt b) {
        a = a.abs();
        b = b.abs();
        if (a.is_zero()) return b;
        if (b.is_zero()) return a;
        unsigned shift = 0;
        while (a.is_even() && b.is_even()) {
            a = a.shifted_right(1);
            b = b.shifted_right(1);
            ++shift;
        }
        while (a.is_even()) a = a.shifted_right(1);
        while (!b.is_zero()) {
            while (b.is_even()) b = b.shifted_right(1);
            if (compare_magnitude(a, b) > 0) std::swap(a, b);
            b = b - a;
        }
        return a.shifted_left(shift);
    }

    std::size_t bit_length() const {
        if (limbs_.empty()) return 0;
        std::uint32_t top = limbs_.back();
        std::size_t n = (limbs_.size() - 1) * 32;
        while (top != 0) {
            ++n;
            top >>= 1;
        }
        return n;
    }

    bool bit(unsigned i) const {
        unsigned w = i / 32, o = i % 32;
        if (w >= limbs_.size()) return false;
        return (limbs_[w] >> o) & 1u;
    }

    double to_double() const {
        double v = 0.0;
        for (std::size_t i = limbs_.size(); i-- > 0;)
            v = v * 4294967296.0 + static_cast<double>(limbs_[i]);
        return sign_ < 0 ? -v : v;
    }

    bool fits_int64() const { return bit_length() <= 62; }

    std::uint64_t to_uint64_mag() const {
        std::uint64_t v = 0;
        for (std::size_t i = limbs_.size(); i-- > 0;)
            v = (v << 32) | limbs_[i];
        return v;
    }

    long long to_int64() const {
        long long v = 0;
        for (std::size_t i = limbs_.size(); i-- > 0;)
            v = (v << 32) | static_cast<long long>(limbs_[i]);
        return sign_ < 0 ? -v : v;
    }

    std::string to_string() const {
        if (sign_ == 0) return "0";
        std::string out;
        BigInt cur = abs();
        BigInt base(1000000000LL);
        while (!cur.is_zero()) {
            BigInt q, r;
            divmod_magnitude(cur, base, q, r);
            long long chunk = r.is_zero() ? 0 : r.to_int64();
            std::string s = std::to_string(chunk);
            if (!q.is_zero())
                s = std::string(9 - s.size(), '0') + s;
            out = s + out;
            cur = q;
        }
        return (sign_ < 0 ? "-" : "") + out;
    }

  private:
    int sign_ = 0;                     // -1, 0, +1
    std::vector<std::uint32_t> limbs_; // little-endian base 2^32, no trailing zeros

    void trim() {
        while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
        if (limbs_.empty()) sign_ = 0;
    }

    static std::vector<std::uint32_t> add_mag(const std::vector<std::uint32_t>& a,
                                              const std::vector<std::uint32_t>& b) {
        const auto& lo = a.size() >= b.size() ? b : a;
        const auto& hi = a.size() >= b.size() ? a : b;
        std::vector<std::uint32_t> r(hi.size() + 1, 0);
        std::uint64_t carry = 0;
        for (std::size_t i = 0; i < hi.size(); ++i) {
            std::uint64_t cur = carry + hi[i] + (i < lo.size() ? lo[i] : 0);
            r[i] = static_cast<std::uint32_t>(cur & 0xffffffffULL);
            carry = cur >> 32;
        }
        r[hi.size()] = static_cast<std::uint32_t>(carry);
        while (!r.empty() && r.back() == 0) r.pop_back();
        return r;
    }

    // requires |a| >= |b|
    static std::vector<std::uint32_t> sub_mag(const std::vector<std::uint32_t>& a,
                                              const std::vector<std::uint32_t>& b) {
        std::vector<std::uint32_t> r(a.size(), 0);
        std::int64_t borrow = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            std::int64_t cur = static_cast<std::int64_t>(a[i]) - borrow -
                               (i < b.size() ? static_cast<std::int64_t>(b[i]) : 0);
            if (cur < 0) {
                cur += 1LL << 32;
                borrow = 1;
            } else {
                borrow = 0;
            }
            r[i] = static_cast<std::uint32_t>(cur);
        }
        while (!r.empty() && r.back() == 0) r.pop_back();
        return r;
    }
};

// Exact rational p/q, q > 0, gcd(p, q) = 1.
class Rational {
  public:
    Rational() : num_(0), den_(1) {}
    Rational(long long v) : num_(v), den_(1) {}
    Rational(long long p, long long q) : num_(p), den_(q) { normalize(); }
    Rational(BigInt p, BigInt q) : num_(std::move(p)), den_(std::move(q)) { normalize(); }

    // doubles are dyadic rationals; this conversion is exact
    static Rational from_double(double d) {
        if (d == 0.0) return Rational();
        if (!std::isfinite(d)) throw std::domain_error("Rational::from_double: non-finite");
        int exp = 0;
        double m = std::frexp(d, &exp);
        long long mant = static_cast<long long>(std::ldexp(m, 53)); // exact integer
        int e = exp - 53;
        BigInt num(mant);
        BigInt den(1);
        if (e >= 0)
            num = num.shifted_left(static_cast<unsigned>(e));
        else
            den = den.shifted_left(static_cast<unsigned>(-e));
        return Rational(std::move(num), std::move(den));
    }

    const BigInt& numerator() const { return num_; }
    const BigInt& denominator() const { return den_; }
    bool is_zero() const { return num_.is_zero(); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.num_, a.den_ * b.den_);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.is_zero()) throw std::domain_error("Rational division by zero");
        return Rational(a.num_ * b.den_, a.den_ * b.num_);
    }
    Rational operator-() const { return Rational(num_.negated(), den_); }

    Rational& operator+=(const Rational& b) { return *this = *this + b; }
    Rational& operator-=(const Rational& b) { return *this = *this - b; }
    Rational& operator*=(const Rational& b) { return *this = *this * b; }
    Rational& operator/=(const Rational& b) { return *this = *this / b; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return BigInt::compare(a.num_ * b.den_, b.num_ * a.den_) < 0;
    }

    double to_double() const {
        BigInt q, r;
        BigInt::divmod_magnitude(num_, den_, q, r);
        double frac = 0.0;
        if (!r.is_zero()) {
            BigInt qf, rf;
            BigInt::divmod_magnitude(r.shifted_left(64), den_, qf, rf);
            frac = std::ldexp(qf.to_double(), -64);
        }
        double v = q.to_double() + frac;
        return num_.is_negative() ? -v : v;
    }

    Rational pow(int e) const {
        if (e < 0) return Rational(1) / pow(-e);
        Rational r(1), base = *this;
        while (e > 0) {
            if (e & 1) r *= base;
            base *= base;
            e >>= 1;
        }
        return r;
    }

    std::string to_string() const {
        if (den_ == BigInt(1)) return num_.to_string();
        return num_.to_string() + "/" + den_.to_string();
    }

  private:
    BigInt num_, den_;

    void normalize() {
        if (den_.is_zero()) throw std::domain_error("Rational with zero denominator");
        if (num_.is_zero()) {
            den_ = BigInt(1);
            return;
        }
        if (den_.is_negative()) {
            num_ = num_.negated();
            den_ = den_.negated();
        }
        BigInt g = BigInt::gcd(num_, den_);
        if (g != BigInt(1)) {
            BigInt q, r;
            BigInt::divmod_magnitude(num_, g, q, r);
            q = num_.is_negative() ? q.negated() : q;
            num_ = q;
            BigInt::divmod_magnitude(den_, g, q, r);
            den_ = q;
        }
    }
};

// Scalar backend glue used by the templated numerics (double or Rational).
template <class F>
struct FieldOps;

template <>
struct FieldOps<double> {
    static double from_int(long long v) { return static_cast<double>(v); }
    static double from_double(double v) { return v; }
    static bool is_zero(double v) { return v == 0.0; }
    static double abs_weight(double v) { return std::fabs(v); }
    static double to_double(double v) { return v; }
};

template <>
struct FieldOps<Rational> {
    static Rational from_int(long long v) { return Rational(v); }
    static Rational from_double(double v) { return Rational::from_double(v); }
    static bool is_zero(const Rational& v) { return v.is_zero(); }
    static double abs_weight(const Rational& v) { return std::fabs(v.to_double()); }
    static double to_double(const Rational& v) { return v.to_double(); }
};

} // namespace semimarkov
