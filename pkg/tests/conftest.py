import hypothesis

# numeric code: example runtimes vary too much for the default deadline
hypothesis.settings.register_profile("numeric", deadline=None, max_examples=50)
hypothesis.settings.load_profile("numeric")
