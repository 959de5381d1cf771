#pragma once

// Prompt template assets. Placeholders use {name}; literal braces are written
// {{ and }} and collapse during rendering. The texts are the search's domain
// knowledge: edit only through the override directory, never in place (the
// template checksum test pins these bytes).

namespace gwsearch::prompts::texts {

inline constexpr const char* kSystem =
    R"TPL(You are an expert in gravitational wave signal detection algorithms. Your task is to design heuristics that can effectively solve optimization problems. The task involves constructing a pipeline for gravitational wave signal detection. This pipeline will encompass data conditioning and time-frequency transformations as part of the signal processing workflow. The input will consist of raw, finite-length dual-channel gravitational wave data from the H1 and L1 detectors. The pipeline will be tested on segmented data spanning several weeks, with each segment having variable length (7000s-30000s). Each segment's dual-channel data will be directly used as input. The ultimate goal is to produce a catalog of potential gravitational wave signals, where each trigger includes information such as GPS time, ranking statistic, and the timing accuracy of the prediction. This systematic approach is essential for effectively identifying and cataloging candidate gravitational wave signals.)TPL";

inline constexpr const char* kSeedAnalysis =
    R"TPL(## Seed Function Analysis Task
Analyze the foundational algorithm's design strategy to establish baseline understanding for Monte Carlo Tree Search (MCTS) exploration. This first-level analysis will guide subsequent optimization directions.

## Seed Function Implementation
```python
{prompt_seed_func}
```
- **Technical implementation details**: {prompt_other_inf}
- **Performance impact rationale**: {prompt_inout_inf}

## Context for Analysis
This initial analysis at MCTS depth first-level should:
- Identify core algorithmic mechanisms
- Extract fundamental processing stages
- Surface high-level optimization opportunities
- Establish baseline for diversity generation
{external_knowledge}

## Analysis Requirements
1. Characterize the seed's core approach in one sentence containing:
    - Primary computational strategy
    - Key transformation stages
    - Fundamental signal processing techniques
    - Overall optimization philosophy

2. Focus on architectural-level characteristics rather than implementation details

3. Description must fit within single braces and avoid:
    - Code references
    - Parameter-level details
    - Performance assessments
    - Comparative statements

## Output Format Rules
- Return optimization strategies within SINGLE BRACE
- Ensure entire response can be parseable by regex: \{{(.*?)\}} with DOTALL flag)TPL";

inline constexpr const char* kPcReflection =
    R"TPL(## Task Objective
Analyze optimization patterns across algorithm versions and generate depth-specific improvement strategies. Current MCTS Depth: depth/max_depth={depth}/{max_depth}

## Depth-Specific Focus
- Shallow (Depth 1-2): Structural patterns & control flow
- Medium (Depth 3-4): Implementation techniques & parameterization
- Deep (Depth 5+): Mathematical formulations & computational primitives

## Algorithm Comparison
- Original (Suboptimal)
```python
{code_worse}
```

- Improved (Optimized)
```python
{code_better}
```

## Depth-Adaptive Analysis
### 1. Core Pattern Extraction
For {depth}-level analysis:
- Shallow: Compare control structures/algorithmic paradigms
- Medium: Analyze parameter configurations/function compositions
- Deep: Examine mathematical operators/numerical methods

### 2. Optimization Principle Generation
Generate 3-5 transferable rules that:
- Directly address {depth}-specific limitations
- Contain concrete parameter values from improved version
- Maintain functional equivalence

## Output Format Rules
- Return optimization strategies within SINGLE BRACE
- Ensure entire response can be parseable by regex: \{{(.*?)\}} with DOTALL flag)TPL";

inline constexpr const char* kPcSynthesis =
    R"TPL(## Task Overview
Develop a novel algorithm that strategically combines components from two reference implementations while introducing innovative enhancements. The solution must demonstrate measurable improvements beyond simple interpolation of existing approaches.
Current Depth Level: [Level {depth}]

## Implementation Analysis
### Code Comparison
1. VERSION A (Baseline Implementation):
```python
{worse_code}
```

2. VERSION B (Enhanced Implementation):
```python
{better_code}
```

### Strengths to Combine
```text
{reflection}
```

Key Synthesis Requirements:
- Preserve 2 distinct advantages from Version A
- Incorporate 3 critical enhancements from Version B
- Identify 1 synergistic improvement opportunity

## Architecture Strategy
{external_knowledge}

### Depth-Specific Synthesis Guidelines (Depth={depth})
1. Structural Synthesis (Depth 1-2):
    - Create hybrid control flow combining best elements from both versions
    - Example: "Combine Version A's iteration structure with Version B's termination conditions"
    - Forbid direct replication of either version's architecture

2. Implementation Fusion (Depth 3-4):
    - Develop novel parameter hybridization techniques
    - Example: "Blend Version A's exploration mechanism with Version B's exploitation strategy"
    - Require at least one innovative combination per functional module

3. Mathematical Innovation (Depth 5+):
    - Derive new computational operators through version synthesis
    - Example: "Fuse Version A's approximation method with Version B's error correction"
    - Mandate 10-20% computational complexity reduction alongside performance gains

## Requirements
1. Core Innovation Targets:
    - Synthesize 3+ novel elements not present in either version
    - Resolve 2 fundamental limitations identified in analysis
    - Introduce 1 breakthrough enhancement with mathematical justification
    - Demonstrate non-trivial performance gain over both versions
    - Prohibit direct replication of complete code blocks

2. Output Format:
{output_format})TPL";

inline constexpr const char* kScPhase1 =
    R"TPL(## Task Overview
Generate depth-specific optimization hints for gravitational wave detection algorithms by synthesizing multi-level reflections.
Current Optimization Depth: {parent_depth}/{max_depth} (shallow: structural patterns, medium: implementation techniques, deep: mathematical details)

## Contextual Insights
1. Peer Algorithm Reflections (Depth {parent_depth}):
    - Formatted as performance-annotated entries: [No.N Brother Reflection | Score: X]<reflection>
    - Time-ordered weighting (newest=highest priority) with objective score-based ranking
    - Includes full technical post-mortems from immediate ancestors
{parent_reflections}

2. Father Algorithm Analysis (Depth {father_depth}):
{father_reflection}

## Hint Generation Requirements
1. Produce 3-5 executable optimization directives that:
    - Integrate cross-depth insights from peer implementations
    - Target {parent_depth}-level (shallow: structural patterns, medium: implementation techniques, deep: mathematical details) components for improvement
    - Formulate mathematically sound enhancements
    - Align with gravitational wave data processing objectives

2. Output Format Rules
    - Return optimization strategies within SINGLE BRACE
    - Ensure entire response can be parseable by regex: \{{(.*?)\}} with DOTALL flag
    - Focus on {parent_depth}-appropriate modifications
    - Emphasize time-domain processing optimizations

## Critical Constraints
- Each directive must correspond to concrete code changes
- Explicitly connect to reflection insights where applicable
- Maintain strict {parent_depth}-level focus in all suggestions
- Exclude explanatory text within the hint brace
- Prioritize modifications matching current depth's optimization type)TPL";

inline constexpr const char* kScPhase2 =
    R"TPL(## Algorithm Optimization Task
Develop an enhanced gravitational signal processing algorithm for interferometer data analysis by implementing concrete improvements from multi-level code analysis.

## Technical Context
1. Optimization Depth Specifications:
- Current Focus Level: {depth} (max_depth={max_depth})
    (1-2: Control flow restructuring, 3-4: Numerical computation optimizations, 5+: Advanced linear algebra methods)
- Code Analysis Insights from Prior Level:
```text
{reflection}
```

2. Base Implementation Details:
[Functional Purpose] {algorithm_description}
[Core Implementation]
```python
{algorithm_code}
```

## Implementation Directives (Depth {depth}):
- Shallow (1-2): Restructure control flow using reflection suggestion (e.g., split data conditioning/analysis phases)
- Medium (3-4): Apply numerical optimizations from reflection (e.g., FFT window size optimization)
- Deep (5+): Implement matrix computation improvements from reflection (e.g., regularized inverse covariance)

{external_knowledge}

## Output Format
{output_format}

## Important Notes
- Focus on algorithmic improvements rather than code style changes
- Ensure the new implementation directly addresses the reflection insights    )TPL";

inline constexpr const char* kPmSingle =
    R"TPL(## Task Overview
You will analyze an original algorithm, an improved version of it, and create a new enhanced algorithm. Below are the key components:

## Algorithm Details
1. ORIGINAL ALGORITHM:
    - Description: {original_algorithm_description}
    - Code:
```python
{original_algorithm_code}
```
    - **Objective Value**: {original_objective_value}

2. BETTER ALGORITHM (Reference Implementation):
    - Description: {better_algorithm_description}
    - Code:
```python
{better_algorithm_code}
```
    - **Objective Value**: {better_objective_value}
    - Improvement Insights:
```text
{better_algorithm_reflection}
```

## Implementation Requirements
1. Analyze the differences between the original and better algorithms
2. Create a new algorithm that:
    - Incorporates successful elements from the better algorithm
    - Addresses limitations revealed in the improvement insights
    - Produces better results than the original algorithm
3. Output format requirements:
{output_format}
{external_knowledge}

## Important Notes
- Focus on algorithmic improvements rather than code style changes
- Ensure the new implementation directly addresses the reflection insights)TPL";

inline constexpr const char* kPmPhase1 =
    R"TPL(## Task Overview
Generate optimized technical guidelines for gravitational wave detection algorithms through systematic analysis of multi-generational reflection insights. Focus on enhancing data conditioning pipelines, time-frequency analysis methods, noise suppression techniques, and H1-L1 detector coherence optimization. Produce executable directives addressing: waveform recognition precision, computational complexity management, and non-stationary noise differentiation while maintaining strict API compliance.

## Input Context
1. NEW INSIGHTS FROM RECENT ITERATIONS:
    - Formatted as performance-annotated entries: [Parent N Reflection | Score: X]<reflection>
    - Time-ordered weighting (newest=highest priority) with objective score-based ranking
    - Includes full technical post-mortems from immediate ancestors
{parent_reflections}

2. LONG-TERM REFLECTION REPOSITORY:
    - Contains battle-tested insights from top 1
    - 3x weighting factor for architectural-level insights
    - Curated through 3-stage filtration:
        1. Statistical significance validation
        2. Cross-generational effectiveness verification
        3. Compatibility check with current detector configurations
{elite_reflection}

## Implementation Requirements
1. Perform weighted synthesis of reflections
2. Generate 3-5 technically-grounded optimization directives
3. Prioritize:
    - Mitigation of historical implementation flaws
    - Amplification of proven effective patterns
    - Weighted integration of multi-generational insights

## Output Format
- Return all guidelines within SINGLE BRACE
- Ensure entire response can be parseable by regex: \{{(.*?)\}} with DOTALL flag
- Concrete technical directives only
- No explanatory text or formatting)TPL";

inline constexpr const char* kPmPhase2 =
    R"TPL(## Task Overview
Leverage insights from prior strategic reflection to architecturally enhance the gravitational wave detection algorithm. Develop improvements that directly address identified limitations in CRITICAL REFLECTION INSIGHTS while preserving core functionality through:

1. Stage-level architectural modifications informed by reflection analysis
2. Reflection-driven noise reduction and coherence enhancement strategies
3. Time-frequency analysis variations targeting specific weaknesses identified
4. H1-L1 synthesis improvements based on cross-detector insights

Generate architecturally distinct variants that implement reflection-derived concepts through fundamental structural changes.

## Input Context
1. CRITICAL REFLECTION INSIGHTS (Improvement Basis):
```text
{reflection}
```

2. REFERENCE IMPLEMENTATION:
[Description] {elite_algorithm_description}
[Baseline Code]
```python
{elite_algorithm_code}
```

## Implementation Requirements
1. Execute reflection-guided analysis:
    - Map reflection insights to specific code components
    - Identify 2-3 architectural limitations in current implementation
2. Propose improvements that directly convert reflection insights into:
    - Enhanced signal path architecture
    - Novel noise handling structures
    - Optimized computational patterns
    - Advanced detector synergy mechanisms
3. Maintain strict interface compatibility with existing system integration

{external_knowledge}

## Output Format
{output_format}

## Important Notes
- Focus on algorithmic improvements rather than code style changes
- Ensure the new implementation directly addresses the reflection insights)TPL";

inline constexpr const char* kPwcReflectPhase1 =
    R"TPL(## Task Overview
Analyze and synthesize technical reflections from multiple algorithm iterations to identify cross-algorithm optimization patterns and guide next-generation algorithm design. Prioritize extraction of generalizable technical principles over implementation-specific details.
Current Optimization Depth: depth/max_depth={depth}/{max_depth} (shallow: structural patterns, medium: implementation techniques, deep: mathematical details)

## Input Context
Analyzing {num_algorithms} algorithm reflections from MCTS exploration trajectories. Technical reflections follow depth-specific analysis requirements. Structural format: [No.N algorithm's reflection (depth: X)]<reflection>
{algorithm_reflections}

## Reflection Requirements
1. **Pattern Identification** (Key Observed Patterns):
    - Extract 2-3 recurring technical strategies (e.g. "Multi-scale wavelet decomposition" not "used Morlet wavelet")
    - Categorize by analysis level:
        * Structural: Component architecture (e.g. "Parallel filter banks")
        * Implementation: Algorithmic choices (e.g. "Adaptive thresholding")
        * Mathematical: Core transforms (e.g. "Orthogonal matching pursuit")

2. **Technical Pathway Analysis** (Promising Technical Pathways):
    - Identify under-utilized but theoretically sound approaches (e.g. "Sparse representation in frequency domain")
    - Specify required technical components without code details (e.g. "Requires: Overcomplete basis construction")

3. **Optimization Principles** (Strategic Optimization Principles):
    - Formulate depth-specific guidelines (e.g. "At mathematical level: Maximize time-frequency product $\leq$ 0.5")
    - Relate physical constraints to algorithmic parameters (e.g. "Wavelet duration should match typical glitch durations")

4. **Specificity Balance**:
    - Technical specificity: Name mathematical concepts (e.g. "Gabor uncertainty") and signal processing domains
    - Implementation avoidance: Omit code structures (e.g. "Avoid: 'Use 3 nested loops'")

## Output Format Rules
- Return optimization strategies within SINGLE BRACE
- Ensure entire response can be parseable by regex: \{{(.*?)\}} with DOTALL flag
- Do not include markdown formatting or additional explanations)TPL";

inline constexpr const char* kPwcComprehensivePhase1 =
    R"TPL(## Task Objective
Synthesize technical insights from algorithm evolution MCTS path to guide targeted improvements. Current Analysis Level: depth/max_depth={depth}/{max_depth} (1-2: structural, 3-4: implementation, 5+: mathematical)

## Depth-Specific Focus
- Shallow (Depth 1-2): Structural patterns & control flow
- Medium (Depth 3-4): Implementation techniques & parameterization
- Deep (Depth 5+): Mathematical formulations & computational primitives

## Input Context
Analyzing {num_algorithms} algorithm reflections from MCTS exploration trajectories. Technical reflections follow depth-specific analysis requirements. Structural format: [No.N algorithm's reflection (depth: X)]<description><objective><code>
{parent_info}

## Synthesis Process
1. Cross-Level Insight Integration:
    - Identify key recurring technical strategies across abstraction levels
    - Note level-specific constraints affecting current implementations

2. Domain Compliance Verification:
    - Validate approaches against gravitational wave signal characteristics
    - Check numerical reliability across different implementation levels

3. Improvement Planning:
    - Structural: Adjust data processing pipelines
    - Implementation: Optimize critical parameter relationships
    - Mathematical: Enhance core transformation components

## Technical Workflow
### 1. Multi-Level Technical Analysis
Structural -> Compare module composition and interaction patterns
Implementation -> Assess parameter sensitivity and adaptation logic
Mathematical -> Examine transformation kernels and precision handling

### 2. Level-Appropriate Optimization
For current depth={depth}:
    - Select 2-4 improvement focus areas with technical rationale
    - Define implementation requirements for each focus area
    - Establish verification criteria with domain constraints

## Output Format Rules
- Return optimization strategies within SINGLE BRACE
- Ensure entire response can be parseable by regex: \{{(.*?)\}} with DOTALL flag
- Do not include markdown formatting or additional explanations)TPL";

inline constexpr const char* kPwcPhase2 =
    R"TPL(## Task Overview
Develop an enhanced gravitational wave detection algorithm through targeted modifications addressing specific technical shortcomings identified in the reflection analysis.

## Input Context
[Critical Reflection Insights]
```text
{reflection}
```

[Baseline Implementation]
[Functional Description] {algorithm_description}
[Current Codebase]
```python
{algorithm_code}
```

{external_knowledge}

## Output Format
{output_format}

## Important Notes
- Focus on algorithmic improvements rather than code style changes
- Ensure the new implementation directly addresses the reflection insights)TPL";

inline constexpr const char* kDomainKnowledge =
    R"TPL(### External Knowledge Integration
1. **Non-linear** Processing Core Concepts:
    - Signal Transformation:
        * Non-linear vs linear decomposition
        * Adaptive threshold mechanisms
        * Multi-scale analysis

    - Feature Extraction:
        * Phase space reconstruction
        * Topological data analysis
        * Wavelet-based detection

    - Statistical Analysis:
        * Robust estimators
        * Non-Gaussian processes
        * Higher-order statistics

2. Implementation Principles:
    - Prioritize adaptive over fixed parameters
    - Consider local vs global characteristics
    - Balance computational cost with accuracy)TPL";

inline constexpr const char* kPostSummary =
    R"TPL(Following is the Design Idea of a heuristic algorithm for the problem and the code with function name 'pipeline_v2' for implementing the heuristic algorithm.
{prompt_inout_inf} {prompt_other_inf}
Design Idea:
{algorithm}

Code:
```python
{code}
```
The content of the Design Idea idea cannot fully represent what the algorithm has done informative. So, now you should re-describe the algorithm using less than 3 sentences.
Hint: You should reference the given Design Idea and highlight the most critical design ideas of the code. You can analyse the code to describe which variables are given higher priorities and which variables are given lower priorities, the parameters and the structure of the code.)TPL";

inline constexpr const char* kRechatPreamble =
    "Your previous code had execution errors, couldn't find signals, or timed out. "
    "Please debug and fix the issues:\n\n";

// Output-format section bound to {output_format}: the original free-code
// instructions for external-executor mode.
inline constexpr const char* kOutputFormatPython =
    R"TPL(- Place the core design idea in a sentence within a brace BEFORE the function definition
- For the core design idea format: \{{A hybrid gravitational wave detection pipeline...}}
- Implement as Python function: {func_name}
- Inputs: {input_count} parameter(s) ({joined_inputs})
- Outputs: {output_count} return value(s) ({joined_outputs})
- Follow: {inout_inf}
- Constraints: {other_inf}
- IMPORTANT: All output code MUST be valid Python syntax. Do not place description text inside curly braces within the function body.
- Example of correct format:
    \{{Core design description here}}
    ```python
    def pipeline_v2(strain_h1: np.ndarray, strain_l1: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Core design description can alternatively be placed here as a docstring"""
        # Function implementation...
    ```)TPL";

// Output-format section for the built-in registered-stage executor.
inline constexpr const char* kOutputFormatDsl =
    R"TPL(- Place the core design idea in a sentence within a brace BEFORE the pipeline description
- For the core design idea format: \{{A hybrid gravitational wave detection pipeline...}}
- Describe the pipeline in the registered-stage language, one stage per line: stage_name(key=value, ...)
- Available stages, in required order:
    detrend_none() | detrend_median(kernel)
    whiten_welch(nperseg, noverlap, smooth_kernel) | whiten_adaptive(win_div, win_min_s, win_max_s, tukey_alpha, overlap_frac, alpha_base, alpha_gain, alpha_lo, alpha_hi, sg_window, sg_polyorder, sigmoid_gain, gain_rate, gain_clip)
    metric_meanpower(nperseg, noverlap) | metric_coherent(nperseg, noverlap, lambda_lo, lambda_hi, curv_lin, curv_tanh)
    trigger_basic(height_factor, distance, prominence_factor, var_fixed) | trigger_multires(threshold_sigma, distance, prominence_factor, curvature_factor, curvature_veto, unc_window, unc_sigma_div, unc_floor, cwt_wmin, cwt_wmax)
- Omitted parameters take their defaults; a bare stage() or stage(default) uses all defaults
- Follow: {inout_inf}
- Constraints: {other_inf}
- Example of correct format:
    \{{Core design description here}}
    ```
    detrend_median(kernel=101)
    whiten_welch(nperseg=4096, noverlap=2048, smooth_kernel=32)
    metric_meanpower(nperseg=256, noverlap=128)
    trigger_basic(height_factor=1, distance=2, prominence_factor=0.3, var_fixed=10)
    ```)TPL";

// The three-stage reference seed in its original free-code form, used for
// {prompt_seed_func} in external-executor mode.
inline constexpr const char* kSeedFunctionPython =
    R"TPL(def data_conditioning(strain_h1: np.ndarray, strain_l1: np.ndarray, times: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    window_length = 4096
    dt = times[1] - times[0]
    fs = 1.0 / dt

    def whiten_strain(strain):
        strain_zeromean = strain - np.mean(strain)
        freqs, psd = signal.welch(strain_zeromean, fs=fs, nperseg=window_length,
                                    window='hann', noverlap=window_length//2)
        smoothed_psd = np.convolve(psd, np.ones(32) / 32, mode='same')
        smoothed_psd = np.maximum(smoothed_psd, np.finfo(float).tiny)
        white_fft = np.fft.rfft(strain_zeromean) / np.sqrt(np.interp(np.fft.rfftfreq(len(strain_zeromean), d=dt), freqs, smoothed_psd))
        return np.fft.irfft(white_fft)

    whitened_h1 = whiten_strain(strain_h1)
    whitened_l1 = whiten_strain(strain_l1)

    return whitened_h1, whitened_l1, times

def compute_metric_series(h1_data: np.ndarray, l1_data: np.ndarray, time_series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fs = 1 / (time_series[1] - time_series[0])
    f_h1, t_h1, Sxx_h1 = signal.spectrogram(h1_data, fs=fs, nperseg=256, noverlap=128, mode='magnitude', detrend=False)
    f_l1, t_l1, Sxx_l1 = signal.spectrogram(l1_data, fs=fs, nperseg=256, noverlap=128, mode='magnitude', detrend=False)
    tf_metric = np.mean((Sxx_h1**2 + Sxx_l1**2) / 2, axis=0)
    gps_mid_time = time_series[0] + (time_series[-1] - time_series[0]) / 2
    metric_times = gps_mid_time + (t_h1 - t_h1[-1] / 2)

    return tf_metric, metric_times

def calculate_statistics(tf_metric, t_h1):
    background_level = np.median(tf_metric)
    peaks, _ = signal.find_peaks(tf_metric, height=background_level * 1.0, distance=2, prominence=background_level * 0.3)
    peak_times = t_h1[peaks]
    peak_heights = tf_metric[peaks]
    peak_deltat = np.full(len(peak_times), 10.0)  # Fixed uncertainty value
    return peak_times, peak_heights, peak_deltat)TPL";

}  // namespace gwsearch::prompts::texts
