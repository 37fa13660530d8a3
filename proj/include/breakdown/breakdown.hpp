#pragma once

#include "breakdown/common.hpp"
#include "breakdown/text.hpp"
#include "breakdown/vocab.hpp"
#include "breakdown/wordpiece.hpp"
#include "breakdown/labels.hpp"
#include "breakdown/dialogue.hpp"
#include "breakdown/reddit.hpp"
#include "breakdown/tensor.hpp"
#include "breakdown/model.hpp"
#include "breakdown/losses.hpp"
#include "breakdown/encoder.hpp"
#include "breakdown/checkpoint.hpp"
#include "breakdown/adam.hpp"
#include "breakdown/masking.hpp"
#include "breakdown/pretrain.hpp"
#include "breakdown/metrics.hpp"
#include "breakdown/ssmba.hpp"
#include "breakdown/finetune.hpp"
#include "breakdown/config.hpp"
#include "breakdown/synthetic.hpp"
#include "breakdown/pipeline.hpp"
