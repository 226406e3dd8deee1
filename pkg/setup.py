from setuptools import setup, find_packages

with open("README.md") as f:
    readme = f.read()

with open("requirements.txt") as f:
    requirements = f.read().split()

setup(name="underlay",
      version="0.1.0",
      packages=find_packages(exclude=["test", "examples"]),
      description="limited feedback power policies for underlay cognitive MIMO links",
      long_description=readme,
      license="Apache License 2.0",
      install_requires=requirements,
      entry_points={"console_scripts": ["underlay-sweep=underlay.cli:main"]},
      )
