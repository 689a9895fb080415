#pragma once

#include "mtbias/attention.hpp"
#include "mtbias/corpus_io.hpp"
#include "mtbias/gender.hpp"
#include "mtbias/lang_id.hpp"
#include "mtbias/prune.hpp"
#include "mtbias/quant_io.hpp"
#include "mtbias/quantize.hpp"
#include "mtbias/report.hpp"
#include "mtbias/resources.hpp"
#include "mtbias/sense_bias.hpp"
#include "mtbias/tensor.hpp"
#include "mtbias/text_metrics.hpp"
#include "mtbias/transformer.hpp"
#include "mtbias/weight_io.hpp"
