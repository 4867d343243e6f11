from noc_sentinel.pipeline import steps

if __name__ == "__main__":

    steps.step_03_evaluate()
