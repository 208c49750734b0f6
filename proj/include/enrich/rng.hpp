#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace enrich {

// Deterministic RNG helpers. std::uniform_*_distribution output is
// implementation-defined, so sampling is done by hand on top of the
// standard-specified mt19937_64 stream.
class rng {
public:
	explicit rng(std::uint64_t seed) : gen_(seed) {}

	std::uint64_t next() { return gen_(); }

	// uniform in [0, n)
	std::uint64_t below(std::uint64_t n) {
		const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
		std::uint64_t v;
		do {
			v = gen_();
		} while (v >= limit);
		return v % n;
	}

	// uniform in [0, 1)
	double real() {
		return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
	}

	template <class T>
	void shuffle(std::vector<T> &v) {
		for (std::size_t i = v.size(); i > 1; --i) {
			std::size_t j = static_cast<std::size_t>(below(i));
			std::swap(v[i - 1], v[j]);
		}
	}

	// index sampled proportionally to non-negative weights
	std::size_t weighted(const std::vector<double> &weights) {
		double total = 0;
		for (double w : weights) total += w;
		double x = real() * total;
		for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
			x -= weights[i];
			if (x < 0) return i;
		}
		return weights.empty() ? 0 : weights.size() - 1;
	}

private:
	std::mt19937_64 gen_;
};

} // namespace enrich
