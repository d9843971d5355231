#pragma once

#include "nfcds/ablation.hpp"
#include "nfcds/degradation.hpp"
#include "nfcds/denoiser.hpp"
#include "nfcds/error.hpp"
#include "nfcds/guidance.hpp"
#include "nfcds/image.hpp"
#include "nfcds/metrics.hpp"
#include "nfcds/random.hpp"
#include "nfcds/sampler.hpp"
#include "nfcds/schedule.hpp"
#include "nfcds/spectral.hpp"
