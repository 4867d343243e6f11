from noc_sentinel.pipeline import steps

if __name__ == "__main__":

    steps.step_04_bench_shapes()
